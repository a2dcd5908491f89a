from .config_loader import load_config
from .data_loader import load_instances, load_records, load_records_frame, load_trajectory
