from .container import (
    Record,
    RecordKind,
    read_container,
    records_by_name,
    write_container,
)
from .reports import curve_frame, read_json, write_csv, write_json
