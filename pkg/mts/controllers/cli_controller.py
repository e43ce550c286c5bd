"""
CLI Controller for the MTS Domain Adaptation toolkit
Handles the generate, train, eval, ablate, benchmark and plot commands
"""

import logging
import os

from mts.config import RunConfig, dump_run_config, load_run_config
from mts.errors import DataError, MtsError, NumericalAbort, UsageError
from mts.models.hyperparams import VARIANTS
from mts.repositories.checkpoint_repository import checkpoint_repository
from mts.repositories.dataset_repository import dataset_repository
from mts.repositories.run_repository import (CHECKPOINT_FILE, CONFIG_FILE, HISTORY_FILE, REPORT_FILE,
                                             REPORT_TEXT_FILE, run_repository)
from mts.services.data_service import data_service
from mts.services.eval_service import eval_service
from mts.services.experiment_service import Job, apply_inference, experiment_service
from mts.services.plot_service import plot_service
from mts.services.report_service import SUMMARY_HEADER, report_service
from mts.services.trainer_service import trainer_service

logger = logging.getLogger(__name__)

SOURCE_FILE = 'source.csv'
TARGET_FILE = 'target.csv'
EXIT_OK = 0


class CliController:
    """Controller to run commands and map failures to exit codes"""

    def __init__(self, settings=None):
        """
        Initialize controller

        Args:
            settings (Settings): Environment settings (output root, default workers)
        """
        self.settings = settings

    def init_app(self, settings):
        self.settings = settings

    def handle(self, command, args):
        """
        Run a command method and translate exceptions into exit codes

        Returns:
            int: 0 ok, 1 usage/config, 2 data, 3 numerical abort
        """
        try:
            code = command(args)
            logger.info(f"{command.__name__} finished")
            return code
        except NumericalAbort as e:
            logger.error(f"Numerical abort: {e} {e.record}")
            return e.exit_code
        except MtsError as e:
            logger.error(f"{type(e).__name__}: {e}")
            return e.exit_code
        except OSError as e:
            logger.error(f"File error: {e}")
            return DataError.exit_code

    # Helpers

    def _config(self, args):
        config = load_run_config(args.config) if getattr(args, 'config', None) else RunConfig()
        if getattr(args, 'seed', None) is not None:
            config = config.with_seed(args.seed)
        return config

    def _out_dir(self, args, config):
        if getattr(args, 'out', None):
            return args.out
        if getattr(args, 'config', None):
            return config.out_dir
        root = self.settings.output_root if self.settings else 'runs'
        return os.path.join(root, 'default')

    def _workers(self, config):
        if config.workers > 1:
            return config.workers
        return self.settings.workers if self.settings else 1

    def _load_data(self, data_dir, num_known):
        source = dataset_repository.load_csv(os.path.join(data_dir, SOURCE_FILE), num_known)
        target = dataset_repository.load_csv(os.path.join(data_dir, TARGET_FILE), num_known)
        return source, target

    def _write_config(self, out_dir, config):
        run_repository.write_text(os.path.join(out_dir, CONFIG_FILE),
                                  dump_run_config(config.with_overrides(out_dir=out_dir)))

    # Commands

    def cmd_generate(self, args):
        """Write source.csv and target.csv for the configured shift"""
        config = self._config(args)
        out_dir = run_repository.ensure_dir(self._out_dir(args, config))
        source, target = data_service.generate(config.shift_config())
        dataset_repository.save_csv(source, os.path.join(out_dir, SOURCE_FILE))
        dataset_repository.save_csv(target, os.path.join(out_dir, TARGET_FILE))
        self._write_config(out_dir, config)
        return EXIT_OK

    def cmd_train(self, args):
        """Train one model; writes checkpoint, history, final report and config"""
        config = self._config(args)
        out_dir = run_repository.ensure_dir(self._out_dir(args, config))
        if getattr(args, 'data', None):
            source, target = self._load_data(args.data, config.num_known)
        else:
            source, target = data_service.generate(config.shift_config())
        self._write_config(out_dir, config)
        history_path = os.path.join(out_dir, HISTORY_FILE)
        try:
            model, history = trainer_service.train(source, target, config.hyperparams())
        except NumericalAbort as e:
            if e.history is not None:
                run_repository.write_history(history_path, e.history)
            raise
        apply_inference(model, config)
        run_repository.write_history(history_path, history)
        checkpoint_repository.save(model, os.path.join(out_dir, CHECKPOINT_FILE))
        report = eval_service.evaluate(model, target)
        run_repository.write_report(os.path.join(out_dir, REPORT_FILE), report)
        return EXIT_OK

    def cmd_eval(self, args):
        """Evaluate a checkpoint on <data>/target.csv; writes report.csv and prints the table"""
        if not args.checkpoint or not args.data:
            raise UsageError("eval needs --checkpoint and --data")
        model = checkpoint_repository.load(args.checkpoint)
        if getattr(args, 'config', None):
            apply_inference(model, self._config(args))
        target = dataset_repository.load_csv(os.path.join(args.data, TARGET_FILE), model.num_known)
        report = eval_service.evaluate(model, target)
        out_dir = run_repository.ensure_dir(args.out or os.path.dirname(os.path.abspath(args.checkpoint)))
        run_repository.write_report(os.path.join(out_dir, REPORT_FILE), report)
        text = report_service.render_report(report)
        run_repository.write_text(os.path.join(out_dir, REPORT_TEXT_FILE), text)
        print(text, end='')
        return EXIT_OK

    def cmd_ablate(self, args):
        """Every method variant over the configured seeds, plus a comparison table"""
        config = self._config(args)
        out_dir = run_repository.ensure_dir(self._out_dir(args, config))
        self._write_config(out_dir, config)
        seeds = experiment_service.seeds(config)
        jobs = [Job(config.with_seed(seed), variant, os.path.join(out_dir, variant, f"seed_{seed}"))
                for variant in VARIANTS for seed in seeds]
        reports = experiment_service.run_all(jobs, workers=self._workers(config))
        rows = []
        for index, variant in enumerate(VARIANTS):
            chunk = reports[index * len(seeds):(index + 1) * len(seeds)]
            rows.append(report_service.summarize(variant, chunk, rotation=config.rotation_deg))
        run_repository.write_rows(os.path.join(out_dir, 'comparison.csv'), SUMMARY_HEADER,
                                  [row.as_row() for row in rows])
        text = report_service.render_comparison(
            rows, title=f"Ablation comparison at {config.rotation_deg} deg over {len(seeds)} seed(s)")
        run_repository.write_text(os.path.join(out_dir, 'comparison.txt'), text)
        print(text, end='')
        return EXIT_OK

    def cmd_benchmark(self, args):
        """MTS against the source-only baseline across domain gaps"""
        config = self._config(args)
        out_dir = run_repository.ensure_dir(self._out_dir(args, config))
        self._write_config(out_dir, config)
        seeds = experiment_service.seeds(config)
        methods = (('mts', 'full'), ('source_only', 'source_only'))
        cells = [(rotation, name, ablation) for rotation in config.rotations for name, ablation in methods]
        jobs = [Job(config.with_seed(seed), ablation,
                    os.path.join(out_dir, f"rot_{rotation:g}", name, f"seed_{seed}"), rotation=rotation)
                for rotation, name, ablation in cells for seed in seeds]
        reports = experiment_service.run_all(jobs, workers=self._workers(config))
        rows = []
        for index, (rotation, name, _) in enumerate(cells):
            chunk = reports[index * len(seeds):(index + 1) * len(seeds)]
            rows.append(report_service.summarize(name, chunk, rotation=rotation))
        run_repository.write_rows(os.path.join(out_dir, 'benchmark.csv'), SUMMARY_HEADER,
                                  [row.as_row() for row in rows])
        text = report_service.render_benchmark(rows, seeds=len(seeds))
        run_repository.write_text(os.path.join(out_dir, 'benchmark.txt'), text)
        print(text, end='')
        return EXIT_OK

    def cmd_plot(self, args):
        """SVG scatter of the first two G_f2 feature dimensions"""
        if not args.checkpoint or not args.data:
            raise UsageError("plot needs --checkpoint and --data")
        model = checkpoint_repository.load(args.checkpoint)
        source, target = self._load_data(args.data, model.num_known)
        out = args.out or os.path.join(os.path.dirname(os.path.abspath(args.checkpoint)), 'features.svg')
        if not out.endswith('.svg'):
            out = os.path.join(out, 'features.svg')
        plot_service.scatter_svg(model, source, target, out, title='Learned features (G_f2)')
        return EXIT_OK


# Singleton instance
cli_controller = CliController()
