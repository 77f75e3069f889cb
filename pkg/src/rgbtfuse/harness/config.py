"""JSON run configuration: scene fields plus assignment and loss knobs."""
import dataclasses
import json
from dataclasses import dataclass, field

from ..assign import GeoShapeParams
from ..exceptions import ConfigError
from ..loss import DEFAULT_LAMBDA
from .scene import SceneConfig

SCENE_KEYS = tuple(f.name for f in dataclasses.fields(SceneConfig))
RUN_KEYS = ("tau", "gamma", "beta", "lambda", "max_disp", "stride")


@dataclass(frozen=True)
class RunConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    tau: float = 0.5
    gamma: float = 2.0
    beta: float = 1.0
    lambda_kl: float = DEFAULT_LAMBDA
    max_disp: float = 1.0
    stride: int = 1

    @property
    def geoshape(self):
        return GeoShapeParams(self.gamma, self.beta)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(data) - set(SCENE_KEYS) - set(RUN_KEYS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        scene_kwargs = {k: data[k] for k in SCENE_KEYS if k in data}
        run_kwargs = {k: data[k] for k in RUN_KEYS if k in data}
        if "lambda" in run_kwargs:
            run_kwargs["lambda_kl"] = run_kwargs.pop("lambda")
        try:
            return cls(scene=SceneConfig(**scene_kwargs), **run_kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self):
        out = dataclasses.asdict(self.scene)
        out.update(
            tau=self.tau,
            gamma=self.gamma,
            beta=self.beta,
            max_disp=self.max_disp,
            stride=self.stride,
        )
        out["lambda"] = self.lambda_kl
        return out


def load_config(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return RunConfig.from_dict(data)
