"""
Protocol orchestration: baseline, training and retention sessions on the
simulated subject, with stride logs, summaries and parameter sweeps.
"""
import concurrent.futures
import itertools
import json
import logging
import os
import time

import numpy as np
import pandas as pd

from config import get_config
from config.protocol_config import estimate_protocol_time
from controllers.aan_supervisor import AANSupervisor, SessionLog, SessionState
from models.run_config import RunConfig
from models.stride_log import read_strides, stride_row, strides_frame, write_strides
from utils.metrics import compute_metrics, summary_json
from utils.subject_model import (
    SubjectPlant,
    estimate_baseline,
    make_target,
    stride_outcome,
)

logger = logging.getLogger(__name__)

STRIDES_FILE = 'strides.csv'
SUMMARY_FILE = 'summary.json'
CONFIG_FILE = 'config.json'
SWEEP_INDEX_FILE = 'sweep_index.csv'


def session_rngs(seed):
    """Independent policy-noise and subject-noise generators from one seed."""
    policy_seq, subject_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(policy_seq), np.random.default_rng(subject_seq)


def _transparent_rows(config, session, outcomes, mask, P):
    zeros = np.zeros(P)
    return [
        stride_row(config.run_id, session.name, idx, outcome, mask, zeros)
        for idx, outcome in enumerate(outcomes, start=1)
    ]


def _training_rows(config, session, log, mask):
    rows = []
    idx = 0
    for epoch in log.epochs:
        for stride in epoch.strides:
            idx += 1
            rows.append(stride_row(
                config.run_id, session.name, idx, stride.outcome, mask, stride.g_kernels,
                kind=stride.kind, mode=stride.mode.value, epoch_idx=epoch.index,
                sigma_eff=stride.sigma_eff, J=stride.J,
            ))
    return rows


def simulate_protocol(config):
    """
    Simulate every session of a validated RunConfig.

    The first (transparent) session fixes the subject's baseline and with it
    the desired trajectory; supervisor state carries across training sessions
    and the subject's learned pattern carries across the whole protocol. On
    transparent strides and during rest gaps the subject only forgets.

    Args:
        config (RunConfig): validated configuration

    Returns:
        tuple: (stride log DataFrame, dict with the session logs and target)
    """
    protocol = config.protocol()
    basis = config.basis()
    grid = basis.grid
    pi2 = config.pi2_config()
    supervisor_cfg = config.supervisor_config()
    mask = supervisor_cfg.eval_mask
    rng_policy, rng_subject = session_rngs(config.seed)

    natural = config.baseline()
    plant = SubjectPlant(natural, natural.theta, config.subject_params(), config.force_field(),
                         rng_subject, mode='transparent', adapt=False, N=grid.N)
    zeros_g = np.zeros(natural.Q)

    supervisor = AANSupervisor(basis, pi2, supervisor_cfg)
    state = None
    rows = []
    logs = {}

    first = protocol.sessions[0]
    logger.info(f"[{config.run_id}] Session {first.name}: {first.strides} transparent strides")
    outcomes = [plant.run_stride(zeros_g, 'transparent') for _ in range(first.strides)]
    estimate = estimate_baseline([o.theta_m for o in outcomes], natural.phases, protocol.baseline_window)
    plant.theta_d = make_target(estimate, config.task())
    # baseline strides are scored against the target they defined
    outcomes = [
        stride_outcome(plant.theta_d, o.theta_m, o.tau, o.g, o.seg_index, grid.N) for o in outcomes
    ]
    rows.extend(_transparent_rows(config, first, outcomes, mask, grid.P))

    for session in protocol.sessions[1:]:
        if session.rest_strides:
            logger.info(f"[{config.run_id}] {session.rest_strides} strides of rest before {session.name}")
            plant.rest(session.rest_strides)
        if session.is_aan:
            if state is None:
                state = SessionState.initial(grid.P, supervisor_cfg, config.w_init, config.g_max)
                logger.info(f"[{config.run_id}] Supervisor starts in {state.mode.value} mode")
            plant.mode, plant.adapt = 'aan', True
            n_epochs = session.strides // (pi2.K + 1)
            logger.info(f"[{config.run_id}] Session {session.name}: {n_epochs} epochs")
            log = supervisor.run_session(state, plant, n_epochs, rng_policy, SessionLog())
            logs[session.name] = log
            rows.extend(_training_rows(config, session, log, mask))
        else:
            plant.mode, plant.adapt = 'transparent', False
            logger.info(f"[{config.run_id}] Session {session.name}: {session.strides} transparent strides")
            outcomes = [plant.run_stride(zeros_g, 'transparent') for _ in range(session.strides)]
            rows.extend(_transparent_rows(config, session, outcomes, mask, grid.P))

    df = strides_frame(rows, grid.P, grid.N)
    return df, {'logs': logs, 'theta_d': plant.theta_d, 'baseline': estimate, 'state': state}


def resolve_output_dir(config, out_dir=None):
    return out_dir or config['output_dir'] or os.path.join(get_config().OUTPUT_DIR, config.run_id)


def run_protocol(config, out_dir=None):
    """
    Run a protocol and write its artifacts.

    Writes ``config.json`` (resolved configuration), ``strides.csv`` and
    ``summary.json``; the summary is computed from the CSV as written.

    Args:
        config (RunConfig): run configuration
        out_dir (str): run directory, overriding the config's output_dir

    Returns:
        dict: {'success': True, 'data': {...}} or {'success': False, 'error': ...}
    """
    violations = config.validate()
    if violations:
        for v in violations:
            logger.error(f"Invalid configuration: {v}")
        return {'success': False, 'error': 'invalid configuration', 'violations': violations}

    start_time = time.time()
    run_dir = resolve_output_dir(config, out_dir)
    try:
        os.makedirs(run_dir, exist_ok=True)
        config.save(os.path.join(run_dir, CONFIG_FILE))

        df, _ = simulate_protocol(config)
        strides_path = os.path.join(run_dir, STRIDES_FILE)
        write_strides(df, strides_path)

        summary = recompute_summary(run_dir)
        with open(os.path.join(run_dir, SUMMARY_FILE), 'w') as f:
            f.write(summary_json(summary) + '\n')

        elapsed = round(time.time() - start_time, 2)
        logger.info(f"[{config.run_id}] Run completed in {elapsed} seconds -> {run_dir}")
        return {
            'success': True,
            'data': {
                'run_dir': run_dir,
                'strides': int(len(df)),
                'summary': summary,
                'processing_time': elapsed,
            }
        }
    except (OSError, ValueError, ArithmeticError) as e:
        logger.error(f"Error running protocol {config.run_id}: {str(e)}")
        return {'success': False, 'error': str(e)}


def recompute_summary(run_dir):
    """SummaryMetrics of an existing run directory, from its CSV and config echo."""
    config = RunConfig.from_file(os.path.join(run_dir, CONFIG_FILE))
    df = read_strides(os.path.join(run_dir, STRIDES_FILE))
    return compute_metrics(df, config)


def parse_override(text):
    """
    Parse ``section.key=v1,v2`` into (key, [values]).

    Each value is read as JSON where possible, so numbers and null keep their
    type and anything else stays a string.
    """
    if '=' not in text:
        raise ValueError(f"override {text!r} must look like section.key=v1,v2")
    key, raw = text.split('=', 1)
    values = []
    for token in raw.split(','):
        token = token.strip()
        try:
            values.append(json.loads(token))
        except json.JSONDecodeError:
            values.append(token)
    if not key.strip() or not values:
        raise ValueError(f"override {text!r} names no key or values")
    return key.strip(), values


def sweep_cells(config, overrides):
    """
    Cartesian product of override values.

    Args:
        config (RunConfig): base configuration
        overrides (list): (key, values) pairs

    Returns:
        list: (cell name, override dict, RunConfig) per cell
    """
    keys = [key for key, _ in overrides]
    cells = []
    for i, combo in enumerate(itertools.product(*[values for _, values in overrides])):
        name = f"cell_{i:03d}"
        settings = dict(zip(keys, combo))
        cell_config = config.with_overrides({**settings, 'run_id': name})
        cells.append((name, settings, cell_config))
    return cells


def run_sweep(config, overrides, out_dir=None, workers=None):
    """
    Run every cell of a parameter sweep, one run directory per cell.

    Returns:
        dict: success flag, per-cell results and the index path
    """
    base_dir = resolve_output_dir(config, out_dir)
    workers = workers or get_config().SWEEP_WORKERS

    try:
        cells = sweep_cells(config, overrides)
    except (KeyError, ValueError) as e:
        logger.error(f"Error building sweep: {str(e)}")
        return {'success': False, 'error': str(e)}

    invalid = {}
    for name, _, cell_config in cells:
        violations = cell_config.validate()
        if violations:
            invalid[name] = violations
    if invalid:
        for name, violations in invalid.items():
            for v in violations:
                logger.error(f"{name}: {v}")
        return {'success': False, 'error': 'invalid configuration',
                'violations': [f"{name}: {v}" for name, vs in invalid.items() for v in vs]}

    logger.info(f"Sweep of {len(cells)} cells with {workers} workers -> {base_dir}")
    results = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {
            executor.submit(run_protocol, cell_config, os.path.join(base_dir, name)): name
            for name, _, cell_config in cells
        }
        for future in concurrent.futures.as_completed(futures):
            results[futures[future]] = future.result()

    index = []
    for name, settings, _ in cells:
        result = results[name]
        row = {'cell': name, **{k: json.dumps(v) for k, v in settings.items()},
               'success': result['success']}
        if result['success']:
            summary = result['data']['summary']
            row.update({
                'B_1': summary['B_1'],
                'B_2': summary['B_2'],
                'baseline_rms_masked': summary['baseline_rms_masked'],
                'post_training_rms_masked': summary['post_training_rms_masked'],
            })
        index.append(row)

    index_path = os.path.join(base_dir, SWEEP_INDEX_FILE)
    os.makedirs(base_dir, exist_ok=True)
    pd.DataFrame(index).to_csv(index_path, index=False, float_format='%.9g')
    failed = sorted(name for name, result in results.items() if not result['success'])
    data = {'cells': len(cells), 'failed': failed, 'index': index_path, 'results': results}
    if failed:
        logger.warning(f"{len(failed)} sweep cell(s) failed: {failed}")
        return {'success': False, 'error': f"{len(failed)} cell(s) failed", 'data': data}
    return {'success': True, 'data': data}


def validation_report(config):
    """Violations plus the estimated protocol duration, for the ``validate`` command."""
    violations = config.validate()
    report = {'violations': violations, 'estimate': None}
    if not violations:
        sessions = [{'name': s.name, 'mode': s.mode, 'strides': s.strides}
                    for s in config.protocol().sessions]
        report['estimate'] = estimate_protocol_time(sessions, float(config['subject']['stride_time']))
    return report


def load_config(path, seed=None):
    """
    Load a RunConfig and apply a command-line seed.

    The output directory stays out of the config echo; pass it to
    ``run_protocol`` instead.
    """
    config = RunConfig.from_file(path)
    return config.with_overrides({'seed': seed}) if seed is not None else config
