import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _env_int(name, default):
    return int(os.getenv(name, default))


def _env_float(name, default):
    return float(os.getenv(name, default))


def _env_bool(name, default):
    return os.getenv(name, str(default)).lower() in ('1', 'true', 'yes')


class Config:
    """Base configuration class"""
    LOG_LEVEL = os.getenv('AUFAIR_LOG_LEVEL', 'INFO')

    # Discretization
    MAX_BINS = _env_int('AUFAIR_MAX_BINS', 5)
    EXCLUDE_PROTECTED = _env_bool('AUFAIR_EXCLUDE_PROTECTED', True)

    # Rule mining
    MIN_SUPPORT = _env_float('AUFAIR_MIN_SUPPORT', 0.05)
    MAX_LEN = _env_int('AUFAIR_MAX_LEN', 3)
    MIN_PRECISION = _env_float('AUFAIR_MIN_PRECISION', 0.7)
    MAX_POOL = _env_int('AUFAIR_MAX_POOL', 150)
    PER_CLASS_SUPPORT = _env_bool('AUFAIR_PER_CLASS_SUPPORT', True)

    # a-NSGA
    POPULATION_SIZE = _env_int('AUFAIR_POPULATION_SIZE', 50)
    QUERY_INTERVAL = _env_int('AUFAIR_QUERY_INTERVAL', 2)
    MAX_INIT_RULES = _env_int('AUFAIR_MAX_INIT_RULES', 5)
    POST_BUDGET_GENERATIONS = _env_int('AUFAIR_POST_BUDGET_GENERATIONS', 0)
    NBOOT = _env_int('AUFAIR_NBOOT', 10)
    UNCERTAINTY_COMBINE = os.getenv('AUFAIR_UNCERTAINTY_COMBINE', 'mean')
    BIAS_METRIC = os.getenv('AUFAIR_BIAS_METRIC', 'equal_opportunity')
    SMOOTHING = _env_bool('AUFAIR_SMOOTHING', True)

    # Black box
    LAMBDA_GRID = (0.001, 0.01, 0.1)
    EPOCHS = _env_int('AUFAIR_EPOCHS', 500)

    # Experiment protocol
    FOLDS = _env_int('AUFAIR_FOLDS', 5)
    TRAIN_RATIO = _env_float('AUFAIR_TRAIN_RATIO', 0.8)
    BUDGET_FRACTIONS = (0.01, 0.1, 1.0)
    N_JOBS = _env_int('AUFAIR_N_JOBS', 1)


class DevelopmentConfig(Config):
    """Development configuration"""
    LOG_LEVEL = os.getenv('AUFAIR_LOG_LEVEL', 'DEBUG')


class TestingConfig(Config):
    """Testing configuration"""
    LOG_LEVEL = os.getenv('AUFAIR_LOG_LEVEL', 'WARNING')
    POPULATION_SIZE = _env_int('AUFAIR_POPULATION_SIZE', 12)
    MAX_POOL = _env_int('AUFAIR_MAX_POOL', 30)
    EPOCHS = _env_int('AUFAIR_EPOCHS', 200)


class ProductionConfig(Config):
    """Production configuration"""
    N_JOBS = _env_int('AUFAIR_N_JOBS', -1)


# Configuration dictionary to easily access different configurations
config_by_name = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
    'default': Config
}


# Get configuration by environment name
def get_config(name=None):
    env = name or os.getenv('AUFAIR_ENV', 'default')
    return config_by_name.get(env, config_by_name['default'])
