from .run_config import DEFAULTS, ProtocolSpec, RunConfig, SessionSpec
from .stride_log import read_strides, stride_columns, strides_frame, write_strides
