"""
Degenerate Dirichlet Toolkit - Configuration
Central configuration for tolerances, scheme defaults, barrier safety margins and outputs
"""

import os


class Tolerances:
    """Numerical tolerances shared across modules"""

    BISECTION_XTOL = 1e-12
    ROUNDOFF = 1e-12
    KINK_TOL = 1e-12  # |kink argument| below this counts as "at the kink"
    LOCALLY_CONSTANT = 1e-12  # derivative magnitude on a 3h neighbourhood
    BOUNDARY_ORDER = 1e-10
    MONOTONICITY = 1e-9  # relative slack when probing residual monotonicity


class SchemeDefaults:
    """Monotone scheme and solver defaults"""

    DT_FACTOR = 0.9
    TOL = 1e-8
    MAX_ITERS = 200  # newton iterations per continuation level
    MAX_EXPLICIT_ITERS = 200_000
    CONTINUATION_STEPS = 4  # eps from h^(1/2) down to h
    FD_JACOBIAN_STEP = 1e-7
    LINE_SEARCH_HALVINGS = 30
    BRACKET_TOL = 1e-6
    CONTINUATION_TOL = 1e-4  # residual target on intermediate eps levels
    NEWTON_FALLBACK_SWEEPS = 50  # explicit sweeps when the line search stalls
    RECORD_EVERY = 100  # explicit iterations between history entries
    MONOTONICITY_PROBE_STEP = 1e-6


class BarrierDefaults:
    """Barrier construction margins"""

    SAFETY = 1.1  # applied to every strict inequality
    SWEEP_POINTS = 1000  # per smooth branch
    CERTIFY_MARGIN = 0.9  # accepted residual fraction of M_level
    HOPF_ADJUST_STEPS = 40
    DATUM_LIFT = 1.0  # added to |f|inf when bracketing nonzero data


class CertifyDefaults:
    """Certification probes"""

    NEIGHBOURHOOD_FACTOR = 3.0  # locally-constant sample radius in units of h
    EXHAUSTIVE_PAIR_CUTOFF = 10_000
    SAMPLED_PAIRS = 1_000_000
    HOPF_THRESHOLD_FRACTION = 0.5
    SUITE_INSTANCES = 50
    SUITE_GAP = 0.1  # g <= f - gap
    SUITE_SPACING = 1.0 / 32.0
    STRICT_MIN_RINGS = 12
    DEFAULT_SEED = 7


class DomainDefaults:
    """Geometry and sampling"""

    LIPSCHITZ_REFINEMENT = 10  # b sampled 10x finer than the solver grid
    LIPSCHITZ_BASE_POINTS = 64
    BOUNDEDNESS_SWEEP = 2001
    UNBOUNDED_LIMIT = 1e12
    RADIAL_CHECK_ANGLES = 8


class OutputDefaults:
    """Artifact locations and formats"""

    ENV_VAR = "DIRICHLET_OUT_DIR"
    DIRECTORY = "outputs"
    SOLUTION_CSV = "solution.csv"
    RESIDUAL_CSV = "residual.csv"
    SWEEP_CSV = "sweep.csv"
    BARRIER_CSV = "barrier.csv"
    REPORT_FILE = "report.jsonl"
    SUMMARY_FILE = "report.md"
    FLOAT_FORMAT = ".17g"

    @classmethod
    def default_directory(cls) -> str:
        return os.environ.get(cls.ENV_VAR, cls.DIRECTORY)


# Export configuration instance
class Config:
    """Master configuration object"""

    tolerances = Tolerances()
    scheme = SchemeDefaults()
    barriers = BarrierDefaults()
    certify = CertifyDefaults()
    domains = DomainDefaults()
    output = OutputDefaults()
