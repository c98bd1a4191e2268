import copy
import json
import logging
import os
from dataclasses import dataclass, field
from typing import List

from config.protocol_config import (
    BASELINE_WINDOW,
    METRICS_SKIP,
    PROTOCOL_PRESETS,
    get_protocol_config,
)
from utils.exceptions import AANError, ConfigValidationError
from utils.force_field import ForceFieldConfig
from utils.phase_kernel import TWO_PI, BasisSet, PhaseGrid
from utils.pi2_core import CostWeights, PI2Config
from utils.subject_model import (
    BASELINE_PRESETS,
    DEFAULT_Q,
    DEFAULT_STRIDE_TIME,
    SubjectParams,
    TargetTask,
    baseline_gait,
)

logger = logging.getLogger(__name__)

SEED_LIMIT = 2 ** 64
SESSION_MODES = ('transparent', 'aan')

DEFAULTS = {
    'seed': 0,
    'run_id': None,
    'output_dir': None,
    'g_max': 10.0,
    'phase_grid': {'P': 10, 'N': 10},
    'basis': {'mu': 5.0},
    'force_field': {'tau_max': 5.0, 'theta_db': 1.0},
    'pi2': {
        'K': 4,
        'h': 10.0,
        'sigma0': 0.03,
        'gamma': 0.992,
        'rho': 1e-6,
        'noise_mode': 'per_segment',
    },
    'supervisor': {
        'beta_upper': 1.5,
        'beta_lower': 0.5,
        'M': 4,
        'lambda_intervention': [80.0, 5.0],
        'lambda_compliance': [5.0, 80.0],
        'eval_mask': [6, 7, 8, 9, 10],
        'J_init': 2.5,
        'w_init': 0.0,
    },
    'subject': {
        'l_h': 0.1,
        'f_h': 0.99,
        'c_tau': 0.4,
        'sigma_m': 0.3,
        'Q': DEFAULT_Q,
        'stride_time': DEFAULT_STRIDE_TIME,
        'baseline_profile': 'typical',
        'baseline_file': None,
    },
    'task': {
        'amplitude': 5.0,
        'center': None,
        'width': 0.439822971502571,  # 0.07 of a stride, rad
    },
    'protocol': {
        'preset': 'full',
        'sessions': None,
        'strides_scale': None,
        'baseline_window': BASELINE_WINDOW,
        'metrics_skip': METRICS_SKIP,
    },
}


@dataclass(frozen=True)
class SessionSpec:
    name: str
    mode: str
    strides: int
    rest_strides: int = 0  # forgetting steps before the first stride

    @property
    def is_aan(self):
        return self.mode == 'aan'


@dataclass(frozen=True)
class ProtocolSpec:
    sessions: List[SessionSpec] = field(default_factory=list)
    baseline_window: float = BASELINE_WINDOW
    metrics_skip: float = METRICS_SKIP

    @property
    def total_strides(self):
        return sum(s.strides for s in self.sessions)

    @property
    def training_sessions(self):
        return [s for s in self.sessions if s.is_aan]


def _merge(defaults, values, path, unknown):
    merged = copy.deepcopy(defaults)
    for key, value in values.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            unknown.append(where)
            continue
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise TypeError(f"config section {where!r} must be an object, got {type(value).__name__}")
            merged[key] = _merge(defaults[key], value, where, unknown)
        else:
            merged[key] = value
    return merged


class RunConfig:
    """
    One simulation run, fully determined by a JSON document.

    Missing keys take their defaults. Semantic problems are collected by
    ``validate`` rather than raised while loading.
    """

    def __init__(self, data=None, source=None):
        self.unknown_keys = []
        self.data = _merge(DEFAULTS, data or {}, '', self.unknown_keys)
        self.source = source

    @classmethod
    def from_dict(cls, data, source=None):
        if not isinstance(data, dict):
            raise TypeError(f"run configuration must be a JSON object, got {type(data).__name__}")
        return cls(data, source)

    @classmethod
    def from_file(cls, path):
        """Load a RunConfig from a JSON file."""
        with open(path, 'r') as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigValidationError([f"{path}: malformed JSON ({e})"])
        return cls.from_dict(data, source=path)

    def to_dict(self):
        return copy.deepcopy(self.data)

    def to_json(self):
        return json.dumps(self.data, indent=2, sort_keys=True)

    def save(self, path):
        with open(path, 'w') as f:
            f.write(self.to_json() + '\n')

    def __getitem__(self, key):
        return self.data[key]

    def with_overrides(self, overrides):
        """
        Copy of this config with dotted-key overrides applied.

        Args:
            overrides (dict): e.g. {'seed': 3, 'subject.l_h': 0.0}

        Returns:
            RunConfig
        """
        data = self.to_dict()
        for dotted, value in overrides.items():
            node = data
            parts = dotted.split('.')
            for part in parts[:-1]:
                if not isinstance(node.get(part), dict):
                    raise KeyError(f"unknown config section in override {dotted!r}")
                node = node[part]
            if parts[-1] not in node:
                raise KeyError(f"unknown config key in override {dotted!r}")
            node[parts[-1]] = value
        result = RunConfig(data, self.source)
        result.unknown_keys = list(self.unknown_keys)
        return result

    # Typed views

    @property
    def seed(self):
        return int(self.data['seed'])

    @property
    def run_id(self):
        return self.data['run_id'] or f"seed{self.seed}"

    @property
    def g_max(self):
        return float(self.data['g_max'])

    @property
    def w_init(self):
        return float(self.data['supervisor']['w_init'])

    @property
    def eval_mask(self):
        return tuple(int(s) for s in self.data['supervisor']['eval_mask'])

    def grid(self):
        return PhaseGrid(**self.data['phase_grid'])

    def basis(self):
        return BasisSet(mu=float(self.data['basis']['mu']), grid=self.grid())

    def force_field(self):
        return ForceFieldConfig(**self.data['force_field'])

    def pi2_config(self):
        section = self.data['pi2']
        return PI2Config(K=int(section['K']), h=float(section['h']), sigma0=float(section['sigma0']),
                         gamma=float(section['gamma']), rho=float(section['rho']),
                         noise_mode=section['noise_mode'])

    def supervisor_config(self):
        # imported here: the supervisor lives a layer above the models
        from controllers.aan_supervisor import SupervisorConfig
        section = self.data['supervisor']
        return SupervisorConfig(
            beta_upper=float(section['beta_upper']),
            beta_lower=float(section['beta_lower']),
            M=int(section['M']),
            lambda_intervention=CostWeights.from_pair(section['lambda_intervention']),
            lambda_compliance=CostWeights.from_pair(section['lambda_compliance']),
            eval_mask=self.eval_mask,
            J_init=float(section['J_init']),
        )

    def subject_params(self):
        section = self.data['subject']
        return SubjectParams(l_h=float(section['l_h']), f_h=float(section['f_h']),
                             c_tau=float(section['c_tau']), sigma_m=float(section['sigma_m']))

    def task(self):
        section = self.data['task']
        center = section['center']
        return TargetTask(amplitude=float(section['amplitude']),
                          center=None if center is None else float(center),
                          width=float(section['width']))

    def baseline(self):
        section = self.data['subject']
        return baseline_gait(section['baseline_profile'], int(section['Q']),
                             int(self.data['phase_grid']['N']), section['baseline_file'])

    def protocol(self):
        section = self.data['protocol']
        if section['sessions'] is not None:
            raw = section['sessions']
        else:
            raw = get_protocol_config(section['preset'], section['strides_scale'])
        sessions = [SessionSpec(str(s['name']), str(s['mode']), int(s['strides']), int(s.get('rest_strides', 0)))
                    for s in raw]
        return ProtocolSpec(sessions=sessions,
                            baseline_window=float(section['baseline_window']),
                            metrics_skip=float(section['metrics_skip']))

    # Validation

    def validate(self):
        """
        Check the whole configuration.

        Returns:
            list: one message per violated invariant, empty when valid
        """
        violations = [f"unknown config key {key!r}" for key in self.unknown_keys]

        seed = self.data['seed']
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < SEED_LIMIT:
            violations.append(f"seed must be an integer in [0, 2^64), got {seed!r}")

        if not _is_number(self.data['g_max']) or not self.data['g_max'] > 0:
            violations.append(f"g_max must be > 0, got {self.data['g_max']!r}")

        grid = self._check(violations, 'phase_grid', self.grid)
        self._check(violations, 'basis', self.basis)
        self._check(violations, 'force_field', self.force_field)
        pi2 = self._check(violations, 'pi2', self.pi2_config)
        supervisor = self._check(violations, 'supervisor', self.supervisor_config)
        self._check(violations, 'subject', self.subject_params)

        if not _is_number(self.data['supervisor']['w_init']):
            violations.append("supervisor.w_init must be a number")
        for key in ('lambda_intervention', 'lambda_compliance'):
            pair = self.data['supervisor'][key]
            if isinstance(pair, (list, tuple)) and len(pair) == 2 and all(_is_number(x) for x in pair):
                if min(pair) < 0:
                    violations.append(f"supervisor.{key} weights must be >= 0, got {pair}")

        if grid is not None:
            if grid.N < 2:
                violations.append(f"phase_grid.N must be >= 2 for the policy update, got {grid.N}")
            if supervisor is not None:
                bad = [s for s in supervisor.eval_mask if not 1 <= s <= grid.N]
                if bad:
                    violations.append(f"supervisor.eval_mask segments {bad} outside 1..{grid.N}")

        subject = self.data['subject']
        Q = subject['Q']
        if not isinstance(Q, int) or isinstance(Q, bool):
            violations.append(f"subject.Q must be an integer, got {Q!r}")
        elif grid is not None and Q < 2 * grid.N:
            violations.append(f"subject.Q must be >= 2N = {2 * grid.N}, got {Q}")
        if not _is_number(subject['stride_time']) or not subject['stride_time'] > 0:
            violations.append(f"subject.stride_time must be > 0, got {subject['stride_time']!r}")
        if subject['baseline_file']:
            if not os.path.isfile(subject['baseline_file']):
                violations.append(f"subject.baseline_file {subject['baseline_file']!r} does not exist")
        elif subject['baseline_profile'] not in BASELINE_PRESETS:
            violations.append(f"subject.baseline_profile must be one of {sorted(BASELINE_PRESETS)}, "
                              f"got {subject['baseline_profile']!r}")

        task = self._check(violations, 'task', self.task)
        if task is not None:
            if task.amplitude < 0:
                violations.append(f"task.amplitude must be >= 0, got {task.amplitude}")
            if not task.width > 0:
                violations.append(f"task.width must be > 0, got {task.width}")
            if task.center is not None and not 0 <= task.center < TWO_PI:
                violations.append(f"task.center must lie in [0, 2*pi), got {task.center}")

        violations.extend(self._validate_protocol(pi2))
        return violations

    def raise_if_invalid(self):
        violations = self.validate()
        if violations:
            raise ConfigValidationError(violations)
        return self

    def _check(self, violations, section, builder):
        try:
            return builder()
        except (AANError, TypeError, ValueError, KeyError) as e:
            violations.append(f"{section}: {e}")
            return None

    def _validate_protocol(self, pi2):
        section = self.data['protocol']
        violations = []
        if section['sessions'] is None and section['preset'] not in PROTOCOL_PRESETS:
            return [f"protocol.preset must be one of {sorted(PROTOCOL_PRESETS)}, got {section['preset']!r}"]
        if not _is_number(section['baseline_window']) or not 0 < section['baseline_window'] <= 1:
            violations.append(f"protocol.baseline_window must lie in (0, 1], got {section['baseline_window']!r}")
        if not _is_number(section['metrics_skip']) or not 0 <= section['metrics_skip'] < 1:
            violations.append(f"protocol.metrics_skip must lie in [0, 1), got {section['metrics_skip']!r}")

        try:
            protocol = self.protocol()
        except (TypeError, ValueError, KeyError) as e:
            violations.append(f"protocol: malformed session list ({e})")
            return violations

        if not protocol.sessions:
            violations.append("protocol needs at least one session")
            return violations
        if protocol.sessions[0].mode != 'transparent':
            violations.append(f"first session {protocol.sessions[0].name!r} must be transparent "
                              f"(it defines the baseline gait)")
        names = [s.name for s in protocol.sessions]
        if len(set(names)) != len(names):
            violations.append(f"session names must be unique, got {names}")
        for s in protocol.sessions:
            if s.mode not in SESSION_MODES:
                violations.append(f"session {s.name!r}: mode must be one of {SESSION_MODES}, got {s.mode!r}")
            if s.strides <= 0:
                violations.append(f"session {s.name!r}: strides must be > 0, got {s.strides}")
            elif s.is_aan and pi2 is not None and s.strides % (pi2.K + 1):
                violations.append(f"session {s.name!r}: {s.strides} strides is not a whole number "
                                  f"of epochs of K+1 = {pi2.K + 1} strides")
            if s.rest_strides < 0:
                violations.append(f"session {s.name!r}: rest_strides must be >= 0, got {s.rest_strides}")
        return violations


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)
