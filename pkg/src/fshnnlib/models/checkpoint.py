import logging
import os
from typing import Any

import numpy as np

from ..autodiff import ParamVector
from ..errors import ConfigError
from ..io.container import Record, RecordKind, read_container, write_container
from ..io.reports import read_json, write_json
from ..nets.deeponet import DeepONetSpec
from ..nets.mlp import MlpSpec
from ..nets.resconv import ResConvSpec
from ..utils.paths import sidecar_path
from .combiner import CombinerSpec
from .hamiltonian import FsHnnOdeModel, HnnModel
from .mlp_dynamics import MlpDynamicsModel
from .pde import FsHnnPdeModel

logger = logging.getLogger(__name__)

Model = HnnModel | FsHnnOdeModel | FsHnnPdeModel | MlpDynamicsModel


def save_model(path: str, model: Model, extra: dict[str, Any] | None = None) -> None:
    """
    Write every parameter group to an FSH1 container (records ``group/block``)
    and the architecture header, plus ``extra`` provenance, to the sidecar.
    """
    records = [
        Record(RecordKind.PARAMS, name, array)
        for group, params in model.groups.items()
        for name, array in params.to_records(group)
    ]
    write_container(path, records)
    header = model.header()
    header["param_count"] = model.param_count
    if extra:
        header["provenance"] = extra
    write_json(sidecar_path(path), header)
    logger.info("Checkpoint saved to %s", path)


def _params(pairs: list[tuple[str, np.ndarray]], group: str) -> ParamVector:
    params = ParamVector.from_records(pairs, group)
    if not len(params.layout):
        raise ConfigError(f"checkpoint has no parameters for group '{group}'")
    return params


def load_model(path: str) -> Model:
    """Rebuild a model written by ``save_model``."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Checkpoint file '{path}' not found.")
    header = read_json(sidecar_path(path))
    pairs = [(r.name, r.array) for r in read_container(path) if r.kind == RecordKind.PARAMS]
    kind = header.get("kind")

    if kind == "hnn":
        return HnnModel(
            spec=MlpSpec.from_dict(header["spec"]),
            params=_params(pairs, "H"),
            dof=int(header["dof"]),
        )
    if kind == "mlp":
        return MlpDynamicsModel(
            spec=MlpSpec.from_dict(header["spec"]),
            params=_params(pairs, "net"),
            dt_model=float(header["dt_model"]),
        )
    if kind == "fs_hnn_ode":
        components = [
            HnnModel(
                spec=MlpSpec.from_dict(spec),
                params=_params(pairs, f"component{k}"),
                dof=int(header["dof"]),
            )
            for k, spec in enumerate(header["components"])
        ]
        return FsHnnOdeModel(
            components=components,
            intervals=[int(i) for i in header["intervals"]],
            combiner_spec=CombinerSpec.from_dict(header["combiner"]),
            combiner_params=_params(pairs, "combiner"),
            metadata=header.get("metadata", {}),
        )
    if kind == "fs_hnn_pde":
        specs = [DeepONetSpec.from_dict(spec) for spec in header["components"]]
        return FsHnnPdeModel(
            component_specs=specs,
            component_params=[_params(pairs, f"component{k}") for k in range(len(specs))],
            intervals=[int(i) for i in header["intervals"]],
            combiner_spec=CombinerSpec.from_dict(header["combiner"]),
            combiner_params=_params(pairs, "combiner"),
            operator_spec=ResConvSpec.from_dict(header["operator"]),
            operator_params=_params(pairs, "operator"),
            grid_shape=tuple(header["grid_shape"]),
            xi=float(header["xi"]),
            dt_model=float(header["dt_model"]),
            shift=np.asarray(header["shift"]),
            scale=np.asarray(header["scale"]),
            metadata=header.get("metadata", {}),
        )
    raise ConfigError(f"Unknown checkpoint kind '{kind}' in {sidecar_path(path)}")
