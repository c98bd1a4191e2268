import os
import logging
from logging.handlers import RotatingFileHandler

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

LOG_FORMAT = '%(asctime)s %(levelname)s: %(message)s [in %(pathname)s:%(lineno)d]'
CONSOLE_FORMAT = '%(levelname)s %(name)s: %(message)s'


class Config:
    """Base process-level configuration; run parameters live in RunConfig files."""
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO').upper()
    LOG_DIR = os.getenv('LOG_DIR', 'logs')

    # Where runs land when neither the config file nor --out names a directory
    OUTPUT_DIR = os.getenv('AAN_OUTPUT_DIR', 'output')

    # Shipped default run configuration
    DEFAULT_RUN_CONFIG = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'default_run.json')

    # Sweep cells run in a thread pool
    SWEEP_WORKERS = int(os.getenv('AAN_SWEEP_WORKERS', '4'))

    @classmethod
    def init_logging(cls, quiet=False):
        root = logging.getLogger()
        for handler in list(root.handlers):
            if getattr(handler, '_aan_handler', False):
                root.removeHandler(handler)

        console = logging.StreamHandler()
        console.setFormatter(logging.Formatter(CONSOLE_FORMAT))
        console.setLevel(logging.WARNING if quiet else cls.LOG_LEVEL)
        console._aan_handler = True
        root.addHandler(console)
        root.setLevel(min(console.level, logging.INFO))
        return root


class DevelopmentConfig(Config):
    """Development configuration."""
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'DEBUG').upper()


class TestingConfig(Config):
    """Testing configuration."""
    LOG_LEVEL = 'WARNING'
    SWEEP_WORKERS = 2


class ProductionConfig(Config):
    """Production configuration."""

    @classmethod
    def init_logging(cls, quiet=False):
        root = super().init_logging(quiet)

        # Production specific setup
        os.makedirs(cls.LOG_DIR, exist_ok=True)
        file_handler = RotatingFileHandler(os.path.join(cls.LOG_DIR, 'aan.log'),
                                           maxBytes=10240, backupCount=10)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        file_handler.setLevel(logging.INFO)
        file_handler._aan_handler = True
        root.addHandler(file_handler)
        logging.getLogger(__name__).info('PI2-AAN simulator startup')
        return root


# Configuration dictionary
config = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
    'default': Config
}


def get_config(name=None):
    return config.get(name or os.getenv('AAN_ENV', 'default'), DevelopmentConfig)
