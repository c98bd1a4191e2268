# config/protocol_config.py
"""
Protocol presets for simulated gait-training runs
"""

# Session sequences: baseline, training bouts, post-training retention checks.
# Stride counts stand in for the timed bouts (10 min at ~1.1 s/stride ~ 545 strides).
PROTOCOL_PRESETS = {
    'full': [
        {'name': 'BSLN', 'mode': 'transparent', 'strides': 270},
        {'name': 'T-1', 'mode': 'aan', 'strides': 500},
        {'name': 'T-2', 'mode': 'aan', 'strides': 500},
        {'name': 'T-3', 'mode': 'aan', 'strides': 500},
        {'name': 'T-4', 'mode': 'aan', 'strides': 500},
        {'name': 'PT-1', 'mode': 'transparent', 'strides': 55},
        {'name': 'PT-2', 'mode': 'transparent', 'strides': 55},
        {'name': 'PT-3', 'mode': 'transparent', 'strides': 55},
    ],
    'quick': [
        {'name': 'BSLN', 'mode': 'transparent', 'strides': 40},
        {'name': 'T-1', 'mode': 'aan', 'strides': 60},
        {'name': 'T-2', 'mode': 'aan', 'strides': 60},
        {'name': 'PT-1', 'mode': 'transparent', 'strides': 20},
    ],
}

# Fraction of the final BSLN strides averaged into the subject's natural gait
BASELINE_WINDOW = 0.2

# Leading fraction of each session excluded from RMS aggregates (steady state only)
METRICS_SKIP = 0.1

# Nominal stride duration used for time estimates
STRIDE_TIME_SECONDS = 1.1


def get_protocol_config(preset='full', strides_scale=None):
    """
    Get the session list of a protocol preset

    Args:
        preset (str): Preset name ('full', 'quick')
        strides_scale (float): Optional factor applied to every session's stride count

    Returns:
        list: Session dicts with name, mode and strides
    """
    if preset not in PROTOCOL_PRESETS:
        raise KeyError(f"unknown protocol preset {preset!r}; choose from {sorted(PROTOCOL_PRESETS)}")
    sessions = [dict(session) for session in PROTOCOL_PRESETS[preset]]

    if strides_scale:
        for session in sessions:
            session['strides'] = max(1, int(round(session['strides'] * strides_scale)))

    return sessions


def estimate_protocol_time(sessions, stride_time=STRIDE_TIME_SECONDS):
    """
    Estimate the walking time a protocol represents

    Args:
        sessions (list): Session dicts
        stride_time (float): Seconds per stride

    Returns:
        dict: Stride totals and human-readable duration
    """
    total_strides = sum(session['strides'] for session in sessions)
    aan_strides = sum(session['strides'] for session in sessions if session['mode'] == 'aan')
    total_time = total_strides * stride_time

    return {
        'total_strides': total_strides,
        'aan_strides': aan_strides,
        'estimated_seconds': int(total_time),
        'estimated_text': f"{total_strides} strides, about {format_duration(total_time)}",
    }


def format_duration(seconds):
    """Seconds under a minute, otherwise minutes to one decimal."""
    if seconds < 60:
        return f"{seconds:.0f} s"
    return f"{seconds / 60:.1f} min"
