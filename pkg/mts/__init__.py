"""
MTS Domain Adaptation toolkit
Open set domain adaptation with a sample separation network and a distribution matching network
"""

import logging

from mts.config import load_settings

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def create_app(config=None):
    """
    Create and configure the command line application

    Args:
        config (dict): Optional settings overriding the environment

    Returns:
        CliApp: Configured application
    """
    settings = load_settings(config)

    # Configure logging
    logging.basicConfig(level=getattr(logging, settings.log_level, logging.INFO), format=LOG_FORMAT)

    from mts.routes.cli_routes import init_app
    return init_app(settings)
