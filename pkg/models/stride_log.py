"""
Stride log: one CSV row per simulated stride.

Column order is fixed; floats are written with 9 significant digits so that
a run replays byte-for-byte.
"""
import logging

import numpy as np
import pandas as pd

from utils.exceptions import ShapeMismatchError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.9g'
STRIDE_KINDS = ('explore', 'eval', 'transparent')
MODES = ('intervention', 'compliance', 'none')

BASE_COLUMNS = [
    'run_id', 'session', 'stride_idx', 'epoch_idx', 'stride_kind', 'mode', 'sigma_eff',
    'J_epoch', 'rms_raw_error_full', 'rms_raw_error_masked',
]


def g_columns(P):
    return [f"g_at_phi_{i}" for i in range(1, P + 1)]


def seg_columns(N):
    return [f"seg_rms_err_{j}" for j in range(1, N + 1)]


def stride_columns(P, N):
    """Exact CSV column order for a P-kernel, N-instant run."""
    return BASE_COLUMNS + g_columns(P) + seg_columns(N)


def stride_row(run_id, session, stride_idx, outcome, mask, g_kernels, kind='transparent',
               mode='none', epoch_idx=None, sigma_eff=0.0, J=None):
    """
    Flatten one stride into a row dict.

    Args:
        run_id (str): run identifier
        session (str): session name
        stride_idx (int): one-based index within the session
        outcome (StrideOutcome): what the plant did
        mask (tuple): one-based segments of the masked RMS
        g_kernels (np.ndarray): executed impedance at the P kernel centres
        kind (str): 'explore', 'eval' or 'transparent'
        mode (str): learning mode value, 'none' outside training
        epoch_idx (int): supervisor epoch, None outside training
        sigma_eff (float): exploration scale in force for the stride
        J (float): epoch cost, evaluation strides only

    Returns:
        dict
    """
    row = {
        'run_id': run_id,
        'session': session,
        'stride_idx': int(stride_idx),
        'epoch_idx': epoch_idx,
        'stride_kind': kind,
        'mode': mode,
        'sigma_eff': float(sigma_eff),
        'J_epoch': np.nan if J is None else float(J),
        'rms_raw_error_full': outcome.rms_full,
        'rms_raw_error_masked': outcome.rms_over(mask),
    }
    for i, g in enumerate(np.asarray(g_kernels, dtype=float), start=1):
        row[f"g_at_phi_{i}"] = float(g)
    for j, err in enumerate(outcome.seg_rms_err, start=1):
        row[f"seg_rms_err_{j}"] = float(err)
    return row


def strides_frame(rows, P, N):
    """Assemble rows into a frame with the fixed column order and dtypes."""
    columns = stride_columns(P, N)
    if rows and len(rows[0]) != len(columns):
        raise ShapeMismatchError(f"stride rows have {len(rows[0])} fields, expected {len(columns)}")
    df = pd.DataFrame(rows, columns=columns)
    df['epoch_idx'] = df['epoch_idx'].astype('Int64')
    return df


def write_strides(df, path):
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep='')
    logger.info(f"Wrote {len(df)} strides to {path}")


def read_strides(path):
    """Read a stride CSV back with the dtypes it was written with."""
    df = pd.read_csv(
        path,
        dtype={'run_id': str, 'session': str, 'stride_kind': str, 'mode': str, 'epoch_idx': 'Int64'},
        keep_default_na=False,
        na_values=[''],
    )
    expected = BASE_COLUMNS
    if list(df.columns[:len(expected)]) != expected:
        raise ShapeMismatchError(f"{path}: not a stride log (columns {list(df.columns[:4])}...)")
    return df


def kernel_count(df):
    return sum(1 for c in df.columns if c.startswith('g_at_phi_'))


def segment_count(df):
    return sum(1 for c in df.columns if c.startswith('seg_rms_err_'))
