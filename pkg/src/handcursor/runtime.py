"""Backend-neutral model loading and inference.

Two backends hide behind one `ModelHandle` interface:

* TorchScript files (``*.pt``) exported by the training glue. Tensor specs
  travel inside the file as an extra archive entry (``tensorspecs.json``)
  so a handle knows its contract without running anything.
* Deterministic stubs (``*.stub.json``). A stub computes a fixed
  pseudo-random sparse linear map of its input, so every downstream module
  is testable without trained weights and golden outputs recorded once stay
  valid on any platform.

Handles are immutable after construction and safe to share across threads;
`forward` is a pure function of its inputs.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ModelContractError,
    ModelFormatError,
    ShapeMismatchError,
    UnsupportedOperatorError,
)

SPEC_ARCHIVE_ENTRY = "tensorspecs.json"

DETECTOR_BASENAME = "detector"
CLASSIFIER_BASENAME = "classifier"


@dataclass(frozen=True)
class TensorSpec:
    """Name and shape of one model input or output (float32 elements).

    A dimension of ``None`` is symbolic (the batch axis) and matches any
    positive size; fixed dimensions must be >= 1.
    """

    name: str
    shape: tuple

    def __post_init__(self):
        if not self.name:
            raise ValueError("tensor spec name must be nonempty")
        if not self.shape:
            raise ValueError(f"tensor spec {self.name!r}: shape must be nonempty")
        for dim in self.shape:
            if dim is not None and (not isinstance(dim, int) or dim < 1):
                raise ValueError(
                    f"tensor spec {self.name!r}: fixed dimensions must be >= 1, got {self.shape}"
                )
        object.__setattr__(self, "shape", tuple(self.shape))

    @property
    def n_elements(self) -> int:
        """Element count with symbolic dimensions counted as 1."""
        n = 1
        for dim in self.shape:
            n *= 1 if dim is None else dim
        return n

    def concrete_shape(self) -> tuple:
        return tuple(1 if dim is None else dim for dim in self.shape)

    def matches(self, shape) -> bool:
        if len(shape) != len(self.shape):
            return False
        return all(
            spec_dim is None or spec_dim == actual
            for spec_dim, actual in zip(self.shape, shape)
        )

    def to_json(self) -> dict:
        return {"name": self.name, "shape": [d for d in self.shape]}

    @classmethod
    def from_json(cls, obj: dict) -> "TensorSpec":
        return cls(name=obj["name"], shape=tuple(obj["shape"]))


def _check_inputs(specs, inputs):
    expected = {s.name for s in specs}
    actual = set(inputs)
    if expected != actual:
        raise ShapeMismatchError(
            f"input names mismatch: expected {sorted(expected)}, got {sorted(actual)}"
        )
    validated = {}
    for spec in specs:
        arr = np.asarray(inputs[spec.name])
        if not spec.matches(arr.shape):
            raise ShapeMismatchError(
                f"input {spec.name!r}: expected shape {spec.shape}, got {tuple(arr.shape)}"
            )
        validated[spec.name] = arr.astype(np.float32, copy=False)
    return validated


class ModelHandle:
    """Loaded model: immutable specs plus a reusable forward pass."""

    def __init__(self, input_specs, output_specs, metadata=None):
        self.input_specs = tuple(input_specs)
        self.output_specs = tuple(output_specs)
        self.metadata = dict(metadata or {})

    def forward(self, inputs: dict) -> dict:
        """Run one forward pass on named float32 tensors.

        Raises ShapeMismatchError when an input name or shape deviates from
        the declared specs; output names/shapes are validated the same way.
        """
        validated = _check_inputs(self.input_specs, inputs)
        outputs = self._run(validated)
        for spec in self.output_specs:
            if spec.name not in outputs:
                raise ModelContractError(f"model did not produce output {spec.name!r}")
            if not spec.matches(outputs[spec.name].shape):
                raise ModelContractError(
                    f"output {spec.name!r}: expected shape {spec.shape}, "
                    f"got {tuple(outputs[spec.name].shape)}"
                )
        return outputs

    def _run(self, inputs: dict) -> dict:
        raise NotImplementedError


# Knuth MMIX constants; all stub arithmetic is exact 64-bit.
_LCG_MULT = 6364136223846793005
_LCG_INC = 1442695040888963407
_U64 = (1 << 64) - 1
_STREAM_SALT = 0x9E3779B97F4A7C15

#: Taps per output element of the stub projection (fewer when the input is
#: smaller). Part of the documented projection rule; not configurable.
STUB_TAPS = 16


def _lcg_step(state: int) -> int:
    return (state * _LCG_MULT + _LCG_INC) & _U64


@dataclass(frozen=True)
class StubNetworkConfig:
    """Deterministic test-double network.

    Projection rule (exact, platform independent):

    * One draw stream per output tensor ``o`` (0-based, declared order),
      seeded ``s = step(step((seed & M) ^ (((o + 1) * 0x9E3779B97F4A7C15) & M)))``
      where ``step(s) = (s * 6364136223846793005 + 1442695040888963407) mod 2**64``.
    * The input is cast to float32 (the declared element kind) and
      flattened row-major to ``x`` of length ``n_in`` (symbolic batch
      counts as 1). Each output element, in row-major order, reads
      ``k = min(16, n_in)`` taps. Per tap: ``s = step(s)`` then
      ``index = (s >> 33) % n_in``; ``s = step(s)`` then
      ``weight = ((s >> 11) * 2**-53) * 2 - 1`` (in [-1, 1)).
    * The element value is the float64 sum of ``weight * x[index]`` in tap
      order, rounded once to float32 (round to nearest even). No bias term.

    Same seed and input therefore give bit-identical outputs everywhere.
    """

    seed: int
    input_spec: TensorSpec
    output_specs: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.seed, int):
            raise ValueError("stub seed must be an integer")
        if not self.output_specs:
            raise ValueError("stub needs at least one output spec")
        object.__setattr__(self, "output_specs", tuple(self.output_specs))

    def to_json(self) -> dict:
        return {
            "version": 1,
            "kind": "stub",
            "seed": self.seed,
            "input": self.input_spec.to_json(),
            "outputs": [s.to_json() for s in self.output_specs],
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StubNetworkConfig":
        if obj.get("kind") != "stub" or obj.get("version") != 1:
            raise ModelFormatError("not a version-1 stub network config")
        return cls(
            seed=obj["seed"],
            input_spec=TensorSpec.from_json(obj["input"]),
            output_specs=tuple(TensorSpec.from_json(o) for o in obj["outputs"]),
            metadata=dict(obj.get("metadata", {})),
        )


def _stub_taps(config: StubNetworkConfig):
    """Precompute (indices, weights) per output tensor from the LCG stream."""
    n_in = config.input_spec.n_elements
    k = min(STUB_TAPS, n_in)
    tables = []
    for o, out_spec in enumerate(config.output_specs):
        state = _lcg_step(_lcg_step((config.seed & _U64) ^ (((o + 1) * _STREAM_SALT) & _U64)))
        n_out = out_spec.n_elements
        idx = np.empty((n_out, k), dtype=np.int64)
        wts = np.empty((n_out, k), dtype=np.float64)
        for j in range(n_out):
            for t in range(k):
                state = _lcg_step(state)
                idx[j, t] = (state >> 33) % n_in
                state = _lcg_step(state)
                wts[j, t] = ((state >> 11) * 2.0**-53) * 2.0 - 1.0
        tables.append((idx, wts))
    return tables


class StubModel(ModelHandle):
    def __init__(self, config: StubNetworkConfig):
        metadata = {"name": "stub", **config.metadata, "backend": "stub"}
        super().__init__([config.input_spec], config.output_specs, metadata)
        self.config = config
        self._tables = _stub_taps(config)

    def _run(self, inputs: dict) -> dict:
        x = inputs[self.input_specs[0].name].astype(np.float64).reshape(-1)
        outputs = {}
        for spec, (idx, wts) in zip(self.output_specs, self._tables):
            acc = np.zeros(idx.shape[0], dtype=np.float64)
            for t in range(idx.shape[1]):  # tap order fixed for exact goldens
                acc += wts[:, t] * x[idx[:, t]]
            outputs[spec.name] = acc.astype(np.float32).reshape(spec.concrete_shape())
        return outputs


def make_stub(config: StubNetworkConfig) -> ModelHandle:
    """Build the deterministic stub handle described by `config`."""
    return StubModel(config)


class TorchScriptModel(ModelHandle):
    def __init__(self, module, input_specs, output_specs, metadata):
        super().__init__(input_specs, output_specs, metadata)
        self._module = module

    def _run(self, inputs: dict) -> dict:
        import torch

        args = [torch.from_numpy(np.ascontiguousarray(inputs[s.name])) for s in self.input_specs]
        with torch.no_grad():
            result = self._module(*args)
        if isinstance(result, dict):
            named = result
        else:
            if not isinstance(result, (tuple, list)):
                result = (result,)
            named = {spec.name: t for spec, t in zip(self.output_specs, result)}
        return {k: v.detach().cpu().numpy() for k, v in named.items()}


def _load_torchscript(path: str) -> ModelHandle:
    import torch

    extra = {SPEC_ARCHIVE_ENTRY: ""}
    try:
        module = torch.jit.load(path, map_location="cpu", _extra_files=extra)
    except Exception as exc:
        message = str(exc)
        if "operator" in message.lower():
            raise UnsupportedOperatorError(f"{path}: {message}") from exc
        raise ModelFormatError(f"{path}: not a loadable TorchScript file: {message}") from exc
    module.eval()
    raw = extra.get(SPEC_ARCHIVE_ENTRY, b"")
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8", errors="replace")
    if not raw:
        raise ModelFormatError(f"{path}: missing {SPEC_ARCHIVE_ENTRY} metadata entry")
    try:
        spec_doc = json.loads(raw)
        input_specs = [TensorSpec.from_json(o) for o in spec_doc["inputs"]]
        output_specs = [TensorSpec.from_json(o) for o in spec_doc["outputs"]]
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"{path}: malformed {SPEC_ARCHIVE_ENTRY}: {exc}") from exc
    metadata = {str(k): str(v) for k, v in spec_doc.get("metadata", {}).items()}
    metadata.setdefault("backend", "torchscript")
    return TorchScriptModel(module, input_specs, output_specs, metadata)


def _load_stub_file(path: str) -> ModelHandle:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        config = StubNetworkConfig.from_json(doc)
    except ModelFormatError:
        raise
    except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"{path}: malformed stub config: {exc}") from exc
    return StubModel(config)


def load_model(path) -> ModelHandle:
    """Load a model file, dispatching on its extension.

    Supports TorchScript (``.pt``/``.pth``) and stub configs
    (``.stub.json``). Raises FileNotFoundError, ModelFormatError or
    UnsupportedOperatorError, each naming the offending path.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"model file missing: {path}")
    if path.endswith(".stub.json"):
        return _load_stub_file(path)
    if path.endswith((".pt", ".pth")):
        return _load_torchscript(path)
    raise ModelFormatError(f"{path}: unsupported model file extension")


def find_model_file(models_dir, basename: str) -> str:
    """Resolve `basename` in a models directory, preferring trained files.

    Looks for ``<basename>.pt`` then ``<basename>.stub.json``.
    """
    for suffix in (".pt", ".pth", ".stub.json"):
        candidate = os.path.join(os.fspath(models_dir), basename + suffix)
        if os.path.isfile(candidate):
            return candidate
    raise FileNotFoundError(
        f"no {basename}.pt or {basename}.stub.json under {models_dir}"
    )


def load_model_pair(models_dir):
    """Load the detector/classifier pair from one directory."""
    detector = load_model(find_model_file(models_dir, DETECTOR_BASENAME))
    classifier = load_model(find_model_file(models_dir, CLASSIFIER_BASENAME))
    return detector, classifier
