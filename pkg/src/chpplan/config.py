import os

ENVIRONMENT = os.environ.get('PLANNER_ENV', 'local')  # 'local' or 'production'

LOGGING_LEVEL = os.environ.get('PLANNER_LOG_LEVEL', 'INFO')

# LOGGING_FORMAT = '[%(module)-10s:%(lineno)-3s] %(message)s'
LOGGING_FORMAT = '%(message)s'

LOGGING_DATEFORMAT = '%Y-%m-%d %H:%M:%S %z'

LOGGING_FILE = 'chpplan.log'

# calendar

HOURS_PER_WEEK = 168

WEEKS_PER_YEAR = 52

HOURS_PER_YEAR = HOURS_PER_WEEK * WEEKS_PER_YEAR

HOURS_PER_DAY = 24

# solver boundary

SOLVER_CMD_ENV = 'PLANNER_SOLVER_CMD'

SOLVER_CMD = os.environ.get(SOLVER_CMD_ENV)

SOLVER_GAP = 1e-4

SOLVER_TIME_LIMIT = 600

SOLVER_TEMPLATES = {
    'cbc': 'cbc {mps} ratio {gap} sec {timelimit} solve solu {sol}',
    'highs': (
        'highs --model_file {mps} --solution_file {sol} '
        '--time_limit {timelimit} --mip_rel_gap {gap}'
    ),
}

FEAS_TOL = 1e-6

# scenario generation

HISTORY_PROBABILITIES = (0.15, 0.15, 0.15, 0.275, 0.275)

SCENARIO_METHODS = ('P', 'F1', 'F2', 'P+F1', 'P+F2')

N_PATHS = 2500

N_REPRESENTATIVES = 5

AR_ORDER = 2

MA_ORDER = 1

N_HARMONICS = 3

FIT_WINDOW_WEEKS = 8

MIN_FIT_WEEKS = 4

KMEDOID_MAX_ITER = 100

STATIONARITY_MARGIN = 1.001

OUTLIER_STD = 4.0

# incentive for concentrating options in uncertain weeks

INCENTIVE_MAX = 5.2

INCENTIVE_STEP = 0.1

INCENTIVE_MIN = 0.1

# run horizon limits

MAX_HORIZON_WEEKS = 8
