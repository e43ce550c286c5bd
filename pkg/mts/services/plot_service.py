"""
Plot Service for the MTS Domain Adaptation toolkit
SVG scatter of learned features: source, target known and target unknown
"""

import logging
import os

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt

from mts.engine import autograd as ag
from mts.engine.nn import forward_features
from mts.errors import ContractError

logger = logging.getLogger(__name__)

COLORS = {
    'source': '#ff69b4',
    'target known': '#1f77b4',
    'target unknown': '#808080',
}

SVG_STYLE = {
    'svg.hashsalt': 'mts',
    'svg.fonttype': 'none',
    'font.size': 9,
    'axes.spines.top': False,
    'axes.spines.right': False,
}


class PlotService:
    """
    Service to export feature scatter plots
    """

    def feature_groups(self, model, source, target):
        """
        First two G_f2 feature dimensions, split by point category

        Returns:
            dict: category -> n x 2 array
        """
        bundle = model.bundle
        if bundle.group('f2').out_dim < 2:
            raise ContractError("Feature scatter needs at least two feature dimensions")
        with ag.no_grad():
            source_features = forward_features(bundle, 'f2', source.x).values[:, :2]
            target_features = forward_features(bundle, 'f2', target.x).values[:, :2]
        unknown = target.y == target.unknown_label
        return {
            'source': source_features,
            'target known': target_features[~unknown],
            'target unknown': target_features[unknown],
        }

    def scatter_svg(self, model, source, target, path, title=None):
        """
        Write the scatter as SVG

        Args:
            model (TrainedModel): Trained networks
            source (Dataset): Source samples
            target (Dataset): Target samples, labels used for coloring
            path (str): Destination .svg
            title (str): Optional plot title
        """
        groups = self.feature_groups(model, source, target)
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with plt.rc_context(SVG_STYLE):
            fig, ax = plt.subplots(figsize=(5.0, 5.0))
            for category, points in groups.items():
                if len(points):
                    ax.scatter(points[:, 0], points[:, 1], s=8, alpha=0.7,
                               color=COLORS[category], label=f"{category} ({len(points)})")
            ax.set_xlabel('feature 0')
            ax.set_ylabel('feature 1')
            if title:
                ax.set_title(title)
            ax.legend(loc='best', frameon=False)
            fig.tight_layout()
            fig.savefig(path, format='svg', metadata={'Date': None})
            plt.close(fig)
        logger.info(f"Saved feature scatter to {path} "
                    f"({', '.join(f'{k}: {len(v)}' for k, v in groups.items())})")
        return {category: int(len(points)) for category, points in groups.items()}


# Singleton instance
plot_service = PlotService()
