"""
Summary metrics of a protocol run, computed from the stride log alone.
"""
import json
import logging
import math

import numpy as np
from scipy import stats

from .phase_kernel import segment_indices

logger = logging.getLogger(__name__)


def _num(value):
    """Plain float for JSON, None for absent values."""
    if value is None:
        return None
    value = float(value)
    return None if math.isnan(value) else value


def mean_sem(values):
    """Mean and standard error of the mean (None for fewer than two values)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return None, None
    mean = float(values.mean())
    if values.size < 2:
        return mean, None
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


def regression_slope(values):
    """
    Least-squares slope of ``values`` against session index 1..n.

    Returns None when fewer than two sessions are available.
    """
    values = list(values)
    if len(values) < 2 or any(v is None for v in values):
        return None
    x = np.arange(1, len(values) + 1, dtype=float)
    return float(stats.linregress(x, np.asarray(values, dtype=float)).slope)


def steady_state(frame, skip):
    """Drop the leading ``skip`` fraction of a session's strides."""
    n_skip = int(math.floor(skip * len(frame)))
    return frame.iloc[n_skip:]


def mask_kernels(grid, mask):
    """One-based indices of the kernels whose centres fall inside the mask segments."""
    seg = segment_indices(grid.kernel_centers, grid.N) + 1
    return [i + 1 for i, s in enumerate(seg) if s in set(mask)]


def on_time_percent(modes):
    modes = list(modes)
    if not modes:
        return None
    return 100.0 * sum(1 for m in modes if m == 'intervention') / len(modes)


def count_switches(modes):
    modes = list(modes)
    return int(sum(1 for a, b in zip(modes, modes[1:]) if a != b))


def session_metrics(frame, session, skip, swing_columns):
    """Aggregates of one session's rows."""
    analyzed = steady_state(frame, skip)
    full_mean, full_sem = mean_sem(analyzed['rms_raw_error_full'])
    masked_mean, masked_sem = mean_sem(analyzed['rms_raw_error_masked'])
    result = {
        'mode': session.mode,
        'strides': int(len(frame)),
        'strides_analyzed': int(len(analyzed)),
        'rms_full_mean': _num(full_mean),
        'rms_full_sem': _num(full_sem),
        'rms_masked_mean': _num(masked_mean),
        'rms_masked_sem': _num(masked_sem),
    }
    if session.is_aan:
        J = frame['J_epoch'].dropna()
        result.update({
            'intervention_on_time_pct': _num(on_time_percent(frame['mode'])),
            'g_swing_mean': _num(frame[swing_columns].to_numpy().mean()) if swing_columns else None,
            'mode_switches': count_switches(frame['mode']),
            'epochs': int((frame['stride_kind'] == 'eval').sum()),
            'J_mean': _num(J.mean()) if len(J) else None,
        })
    return result


def compute_metrics(df, config):
    """
    Summarise a stride log.

    Args:
        df (pd.DataFrame): stride log as read back from CSV
        config (RunConfig): the run's configuration (session order, mask, skip)

    Returns:
        dict: SummaryMetrics, JSON-ready
    """
    protocol = config.protocol()
    grid = config.grid()
    swing = [f"g_at_phi_{i}" for i in mask_kernels(grid, config.eval_mask)]
    skip = protocol.metrics_skip

    sessions = {}
    order = []
    for session in protocol.sessions:
        frame = df[df['session'] == session.name]
        if frame.empty:
            logger.warning(f"Session {session.name} has no strides in the log")
            continue
        sessions[session.name] = session_metrics(frame, session, skip, swing)
        order.append(session.name)

    training = [s.name for s in protocol.training_sessions if s.name in sessions]
    g_swing = [sessions[name]['g_swing_mean'] for name in training]
    on_time = [sessions[name]['intervention_on_time_pct'] for name in training]
    if len(training) < 2:
        logger.warning(f"Only {len(training)} training session(s); regression slopes are absent")

    intervention = df[df['mode'] == 'intervention']
    g_columns = [c for c in df.columns if c.startswith('g_at_phi_')]
    if len(intervention):
        g_means = {c: _num(intervention[c].mean()) for c in g_columns}
    else:
        g_means = None

    baseline_name = protocol.sessions[0].name if protocol.sessions else None
    baseline = sessions.get(baseline_name, {})
    seen_training = False
    post = []
    for session in protocol.sessions:
        if session.is_aan:
            seen_training = True
        elif seen_training and session.name in sessions:
            post.append(session.name)

    summary = {
        'run_id': str(df['run_id'].iloc[0]) if len(df) else config.run_id,
        'seed': config.seed,
        'config': config.to_dict(),
        'session_order': order,
        'sessions': sessions,
        'B_1': regression_slope(g_swing),
        'B_2': regression_slope(on_time),
        'intervention_g_means': g_means,
        'swing_kernels': swing,
        'baseline_rms_full': baseline.get('rms_full_mean'),
        'baseline_rms_masked': baseline.get('rms_masked_mean'),
        'post_training_rms_full': None,
        'post_training_rms_masked': None,
        'post_vs_baseline_masked': None,
        'post_vs_baseline_change_masked': None,
    }
    if post:
        summary['post_training_rms_full'] = _num(np.mean([sessions[n]['rms_full_mean'] for n in post]))
        summary['post_training_rms_masked'] = _num(np.mean([sessions[n]['rms_masked_mean'] for n in post]))
        base = summary['baseline_rms_masked']
        if base:
            ratio = summary['post_training_rms_masked'] / base
            summary['post_vs_baseline_masked'] = ratio
            summary['post_vs_baseline_change_masked'] = ratio - 1.0
    return summary


def summary_json(summary):
    """Canonical JSON text of a summary; identical input gives identical bytes."""
    return json.dumps(summary, indent=2, sort_keys=True)
