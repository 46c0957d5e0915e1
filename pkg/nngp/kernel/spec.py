"""
Kernel specification: per-layer hyperparameters, first-layer measure, and the
flat ``key = value`` text format they are stored in.
"""

from dataclasses import dataclass, field, replace
import math
from pathlib import Path
import re
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..config import METHOD_NAMES, PI_KINDS
from ..data.dataset import parse_atoms
from ..exceptions import ConfigError, DataError
from ..utils.files import format_float
from ..utils.rng import MAX_SEED
from .activation import ActivationKind, parse_activation
from .gauss_expect import ExpectationMethod, MethodTag
from .measures import Empirical, FirstLayerMeasure, GaussianIID, L1SphereUniform

PathLike = Union[str, Path]

# Sentinel value of ``pi.atoms`` inside model files, whose atoms travel in their own section.
EMBEDDED_ATOMS = "@embedded"

LAYER_FIELDS = ("mu_w", "var_w", "mu_b", "var_b")
PI_GAUSSIAN_FIELDS = ("mu_w", "var_w", "mu_b", "var_b")

_LAYER_KEY = re.compile(r"^layer(\d+)$")


# --------------------------------------------------------------------------- flat config files


@dataclass(frozen=True)
class FlatConfig:
    """Raw ``key = value`` pairs with the line each key came from."""

    values: Dict[str, str]
    lines: Dict[str, int]
    name: str = "config"

    def error(self, message: str, key: Optional[str] = None) -> ConfigError:
        return ConfigError(f"{self.name}: {message}", key=key, line=self.lines.get(key) if key else None)


def parse_flat_config(text: str, name: str = "config") -> FlatConfig:
    """
    Split a flat config into key/value strings.

    Blank lines and ``#`` comments are skipped. Duplicate keys are an error.
    """
    values: Dict[str, str] = {}
    lines: Dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{name}: expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{name}: missing key", line=lineno)
        if key in values:
            raise ConfigError(f"{name}: duplicate key", key=key, line=lineno)
        values[key] = value
        lines[key] = lineno
    return FlatConfig(values, lines, name)


def nest_sections(conf: FlatConfig, sections: Iterable[str]) -> dict:
    """
    Group dotted keys into nested dicts for validation.

    ``pi.var_w`` goes to ``{"pi": {"var_w": ...}}`` and ``layer3.mu_b`` to
    ``{"layers": {3: {"mu_b": ...}}}``. Prefixes outside ``sections`` and the
    layer pattern are left dotted so that strict models reject them.
    """
    sections = set(sections)
    nested: dict = {}
    for key, value in conf.values.items():
        if "." not in key:
            nested[key] = value
            continue
        prefix, sub = key.split(".", 1)
        layer = _LAYER_KEY.match(prefix)
        if layer and "layers" in sections:
            nested.setdefault("layers", {}).setdefault(int(layer.group(1)), {})[sub] = value
        elif prefix in sections:
            nested.setdefault(prefix, {})[sub] = value
        else:
            nested[key] = value
    return nested


def _flat_key(loc: Tuple) -> str:
    parts = [str(p) for p in loc]
    if parts and parts[0] == "layers" and len(parts) >= 2:
        return ".".join([f"layer{parts[1]}", *parts[2:]])
    return ".".join(parts)


def validation_error(conf: FlatConfig, error: ValidationError) -> ConfigError:
    """Convert the first pydantic error into a ConfigError naming the flat key and line."""
    first = error.errors()[0]
    key = _flat_key(first["loc"])
    message = "unknown key" if first["type"] == "extra_forbidden" else first["msg"]
    return conf.error(message, key)


class StrictSection(BaseModel):
    """Base for config sections: unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", frozen=True)


class PiSection(StrictSection):
    kind: str = "gaussian"
    var_w: Optional[float] = Field(None, ge=0, allow_inf_nan=False)
    mu_w: Optional[float] = Field(None, allow_inf_nan=False)
    var_b: Optional[float] = Field(None, ge=0, allow_inf_nan=False)
    mu_b: Optional[float] = Field(None, allow_inf_nan=False)
    atoms: Optional[str] = None
    samples: Optional[int] = Field(None, ge=1)


class LayerSection(StrictSection):
    mu_w: float = Field(0.0, allow_inf_nan=False)
    var_w: float = Field(1.0, ge=0, allow_inf_nan=False)
    mu_b: float = Field(0.0, allow_inf_nan=False)
    var_b: float = Field(0.0, ge=0, allow_inf_nan=False)


class KernelSpecConfig(StrictSection):
    """Schema of a kernel spec file."""

    depth: int = Field(ge=1)
    d_in: int = Field(ge=1)
    activation: str
    pi: PiSection = PiSection()
    layers: Dict[int, LayerSection] = {}
    method: str = "quadrature"
    quad_nodes: Optional[int] = Field(None, ge=2)
    mc_samples: Optional[int] = Field(None, ge=1)
    seed: int = Field(0, ge=0, le=MAX_SEED)
    optimize: Optional[str] = None


# --------------------------------------------------------------------------- domain types


@dataclass(frozen=True)
class LayerHyperparams:
    """Unscaled weight/bias mean and variance of one layer l >= 2."""

    mu_w: float = 0.0
    var_w: float = 1.0
    mu_b: float = 0.0
    var_b: float = 0.0

    def __post_init__(self):
        for name in LAYER_FIELDS:
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.var_w < 0 or self.var_b < 0:
            raise ConfigError(f"variances must be >= 0, got var_w={self.var_w}, var_b={self.var_b}")


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """
    Everything that determines the induced kernel.

    ``layers[i]`` holds the hyperparameters of layer l = i + 2, so the last entry
    is the output layer L + 1 and must carry no bias. The bias of layer 1 is part
    of ``pi``.
    """

    depth: int
    d_in: int
    activation: ActivationKind
    pi: FirstLayerMeasure
    layers: Tuple[LayerHyperparams, ...]
    method: ExpectationMethod = field(default_factory=ExpectationMethod.quadrature)
    seed: int = 0
    free: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "free", tuple(self.free))
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}", key="depth")
        if self.d_in < 1:
            raise ConfigError(f"d_in must be >= 1, got {self.d_in}", key="d_in")
        if len(self.layers) != self.depth:
            raise ConfigError(f"expected {self.depth} layers (l = 2..{self.depth + 1}), got {len(self.layers)}")
        out = self.layers[-1]
        if out.mu_b != 0.0 or out.var_b != 0.0:
            raise ConfigError("the output layer has no bias", key=f"layer{self.depth + 1}.var_b")
        if isinstance(self.pi, Empirical) and self.pi.d_in != self.d_in:
            raise ConfigError(f"atoms have dimension {self.pi.d_in}, d_in is {self.d_in}", key="pi.atoms")
        names = set(self.param_names()) | {"noise"}
        for name in self.free:
            if name not in names:
                raise ConfigError(f"'{name}' is not a tunable hyperparameter of this spec", key="optimize")

    @property
    def output_layer(self) -> LayerHyperparams:
        return self.layers[-1]

    def layer(self, l: int) -> LayerHyperparams:
        """Hyperparameters of layer l (2 <= l <= L + 1)."""
        if not 2 <= l <= self.depth + 1:
            raise IndexError(f"layer index {l} outside 2..{self.depth + 1}")
        return self.layers[l - 2]

    def bias_moments(self, l: int) -> Tuple[float, float]:
        """Mean and variance of the bias added to layer l's pre-activations (1 <= l <= L)."""
        if l == 1:
            return self.pi.bias_moments(self.d_in)
        return self.layer(l).mu_b, self.layer(l).var_b

    @property
    def hidden_bias(self) -> Tuple[Tuple[float, float], ...]:
        return tuple(self.bias_moments(l) for l in range(1, self.depth + 1))

    # ----------------------------------------------------------------- tunable parameters

    def param_names(self) -> List[str]:
        names = []
        if isinstance(self.pi, GaussianIID):
            names += [f"pi.{f}" for f in PI_GAUSSIAN_FIELDS]
        for l in range(2, self.depth + 2):
            fields = ("mu_w", "var_w") if l == self.depth + 1 else LAYER_FIELDS
            names += [f"layer{l}.{f}" for f in fields]
        return names

    def get_param(self, name: str) -> float:
        prefix, attr = _split_param(name)
        if prefix == "pi":
            if not isinstance(self.pi, GaussianIID):
                raise ConfigError(f"'{name}' only exists for a gaussian first-layer measure", key=name)
            return getattr(self.pi, attr)
        return getattr(self.layer(_layer_index(prefix, name, self.depth)), attr)

    def with_params(self, params: Mapping[str, float]) -> "KernelSpec":
        """Copy of this spec with the named hyperparameters replaced."""
        pi_updates: Dict[str, float] = {}
        layer_updates: Dict[int, Dict[str, float]] = {}
        for name, value in params.items():
            prefix, attr = _split_param(name)
            if prefix == "pi":
                if not isinstance(self.pi, GaussianIID):
                    raise ConfigError(f"'{name}' only exists for a gaussian first-layer measure", key=name)
                pi_updates[attr] = float(value)
            else:
                layer_updates.setdefault(_layer_index(prefix, name, self.depth), {})[attr] = float(value)
        pi = replace(self.pi, **pi_updates) if pi_updates else self.pi
        layers = tuple(
            replace(hp, **layer_updates[i + 2]) if i + 2 in layer_updates else hp
            for i, hp in enumerate(self.layers)
        )
        return replace(self, pi=pi, layers=layers)


def _split_param(name: str) -> Tuple[str, str]:
    if "." not in name:
        raise ConfigError(f"'{name}' is not a hyperparameter name", key=name)
    prefix, attr = name.split(".", 1)
    if attr not in LAYER_FIELDS:
        raise ConfigError(f"'{name}' is not a hyperparameter name", key=name)
    return prefix, attr


def _layer_index(prefix: str, name: str, depth: int) -> int:
    match = _LAYER_KEY.match(prefix)
    if not match or not 2 <= int(match.group(1)) <= depth + 1:
        raise ConfigError(f"'{name}' is not a hyperparameter name", key=name)
    return int(match.group(1))


# --------------------------------------------------------------------------- parsing


def _build_method(model: KernelSpecConfig, conf: FlatConfig) -> ExpectationMethod:
    name = model.method.strip().lower()
    try:
        if name == "analytic":
            return ExpectationMethod.analytic()
        if name == "quadrature":
            return ExpectationMethod.quadrature(model.quad_nodes)
        if name == "montecarlo":
            return ExpectationMethod.monte_carlo(model.mc_samples, seed=model.seed)
    except ConfigError as e:
        raise conf.error(str(e), e.key)
    raise conf.error(f"unknown method '{model.method}', expected one of {', '.join(METHOD_NAMES)}", "method")


def _build_pi(model: KernelSpecConfig, conf: FlatConfig, base_dir: Optional[Path],
              atoms_text: Optional[str]) -> FirstLayerMeasure:
    sec = model.pi
    if sec.kind not in PI_KINDS:
        raise conf.error(f"unknown measure '{sec.kind}', expected one of {', '.join(PI_KINDS)}", "pi.kind")
    gaussian_keys = [f for f in PI_GAUSSIAN_FIELDS if getattr(sec, f) is not None]

    if sec.kind == "gaussian":
        for key in ("atoms", "samples"):
            if getattr(sec, key) is not None:
                raise conf.error("only used by non-gaussian measures", f"pi.{key}")
        return GaussianIID(
            var_w=1.0 if sec.var_w is None else sec.var_w,
            var_b=sec.var_b or 0.0,
            mu_w=sec.mu_w or 0.0,
            mu_b=sec.mu_b or 0.0,
        )

    if gaussian_keys:
        raise conf.error("only used by the gaussian measure", f"pi.{gaussian_keys[0]}")

    if sec.kind == "l1sphere":
        if sec.atoms is not None:
            raise conf.error("only used by the empirical measure", "pi.atoms")
        return L1SphereUniform(samples=sec.samples)

    if sec.samples is not None:
        raise conf.error("only used by the l1sphere measure", "pi.samples")
    if sec.atoms is None:
        raise conf.error("the empirical measure needs an atoms file", "pi.atoms")
    try:
        if sec.atoms == EMBEDDED_ATOMS:
            if atoms_text is None:
                raise conf.error("no embedded atoms available", "pi.atoms")
            W, b, p = parse_atoms(atoms_text, model.d_in, "embedded atoms")
        else:
            path = Path(sec.atoms)
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            try:
                text = path.read_text(encoding="utf-8")
            except OSError as e:
                raise conf.error(f"cannot read atoms file {path}: {e.strerror or e}", "pi.atoms")
            W, b, p = parse_atoms(text, model.d_in, str(path))
        return Empirical(W, b, p, source=sec.atoms)
    except ConfigError as e:
        raise conf.error(str(e), "pi.atoms")


def _build_layers(model: KernelSpecConfig, conf: FlatConfig) -> Tuple[LayerHyperparams, ...]:
    expected = range(2, model.depth + 2)
    for l in model.layers:
        if l not in expected:
            key = next((k for k in conf.values if k.startswith(f"layer{l}.")), f"layer{l}")
            raise conf.error(f"layer index {l} outside 2..{model.depth + 1}", key)
    layers = []
    for l in expected:
        if l not in model.layers:
            raise conf.error(f"missing hyperparameters for layer {l}", f"layer{l}.var_w")
        sec = model.layers[l]
        if l == model.depth + 1:
            for key in ("mu_b", "var_b"):
                if getattr(sec, key) != 0.0:
                    raise conf.error("the output layer has no bias", f"layer{l}.{key}")
        layers.append(LayerHyperparams(sec.mu_w, sec.var_w, sec.mu_b, sec.var_b))
    return tuple(layers)


def parse_kernel_spec(text: str, base_dir: Optional[PathLike] = None, atoms_text: Optional[str] = None,
                      name: str = "spec") -> KernelSpec:
    """
    Parse a kernel spec from flat config text.

    Args:
        text: Config text
        base_dir: Directory that relative ``pi.atoms`` paths are resolved against
        atoms_text: Atoms CSV used when ``pi.atoms = @embedded``
        name: Label for error messages

    Raises:
        ConfigError: unknown key, bad value or inconsistent spec (names key and line)
        DataError: malformed atoms CSV
    """
    conf = parse_flat_config(text, name)
    try:
        model = KernelSpecConfig.model_validate(nest_sections(conf, ("pi", "layers")))
    except ValidationError as e:
        raise validation_error(conf, e)

    try:
        activation = parse_activation(model.activation)
    except ConfigError as e:
        raise conf.error(str(e), "activation")
    base = Path(base_dir) if base_dir is not None else None
    pi = _build_pi(model, conf, base, atoms_text)
    layers = _build_layers(model, conf)
    method = _build_method(model, conf)
    free = tuple(p.strip() for p in (model.optimize or "").split(",") if p.strip())

    try:
        return KernelSpec(model.depth, model.d_in, activation, pi, layers, method, model.seed, free)
    except ConfigError as e:
        raise conf.error(str(e), e.key)


def load_kernel_spec(path: PathLike) -> KernelSpec:
    """Read a kernel spec file; relative atom paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read spec {path}: {e.strerror or e}")
    return parse_kernel_spec(text, base_dir=path.parent, name=str(path))


def dump_kernel_spec(spec: KernelSpec, atoms_ref: Optional[str] = None) -> str:
    """
    Serialize a spec to flat config text that parse_kernel_spec reads back.

    Args:
        spec: Spec to write
        atoms_ref: Value written for ``pi.atoms`` (empirical measures); defaults
            to the path the atoms were loaded from
    """
    lines = [
        f"depth = {spec.depth}",
        f"d_in = {spec.d_in}",
        f"activation = {spec.activation.value}",
        f"method = {spec.method.tag.value}",
    ]
    if spec.method.tag is MethodTag.QUADRATURE:
        lines.append(f"quad_nodes = {spec.method.nodes}")
    elif spec.method.tag is MethodTag.MONTE_CARLO:
        lines.append(f"mc_samples = {spec.method.samples}")
    lines.append(f"seed = {spec.seed}")

    lines.append(f"pi.kind = {spec.pi.kind.value}")
    if isinstance(spec.pi, GaussianIID):
        for f in PI_GAUSSIAN_FIELDS:
            lines.append(f"pi.{f} = {format_float(getattr(spec.pi, f))}")
    elif isinstance(spec.pi, L1SphereUniform):
        if spec.pi.samples is not None:
            lines.append(f"pi.samples = {spec.pi.samples}")
    else:
        ref = atoms_ref or spec.pi.source
        if ref is None:
            raise DataError("empirical measure has no atoms file to reference")
        lines.append(f"pi.atoms = {ref}")

    for l in range(2, spec.depth + 2):
        hp = spec.layer(l)
        fields = ("mu_w", "var_w") if l == spec.depth + 1 else LAYER_FIELDS
        for f in fields:
            lines.append(f"layer{l}.{f} = {format_float(getattr(hp, f))}")
    if spec.free:
        lines.append(f"optimize = {','.join(spec.free)}")
    return "\n".join(lines) + "\n"
