# utils/config_utils.py
import os
from dataclasses import dataclass, field
from typing import Optional

from dotenv import load_dotenv

from utils.errors import ConfigError

# ---------------- Load Env ----------------
load_dotenv()

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEFAULT_RULES_PATH = os.getenv("LIKETALLY_RULES", os.path.join(ROOT, "models", "topic_rules.json"))
DEFAULT_K = int(os.getenv("LIKETALLY_K", 5))
DEFAULT_TOL = float(os.getenv("LIKETALLY_TOL", 1e-8))
DEFAULT_MAX_ITER = int(os.getenv("LIKETALLY_MAX_ITER", 200))
DEFAULT_WORKERS = int(os.getenv("LIKETALLY_WORKERS", 1))
DEFAULT_SEED = int(os.getenv("LIKETALLY_SEED", 2016))

EFFECT_METHODS = ("discrete", "beta-mu")
EVAL_MODELS = ("full", "selected")
OUTPUT_FORMATS = ("json", "csv")


@dataclass
class RunConfig:
    tweets: Optional[str] = None
    followers: Optional[str] = None
    rules: str = DEFAULT_RULES_PATH
    out_dir: str = "out"
    candidates: list = field(default_factory=list)
    k: int = DEFAULT_K
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    effect_method: str = "discrete"
    eval_model: str = "full"
    seed: int = DEFAULT_SEED
    output_format: str = "json"
    workers: int = DEFAULT_WORKERS

    def validate(self, needs_inputs=True):
        """Raise ConfigError on a config the pipeline cannot run with."""
        if self.k < 0:
            raise ConfigError("k must be >= 0")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.tol <= 0:
            raise ConfigError("tol must be > 0")
        if self.effect_method not in EFFECT_METHODS:
            raise ConfigError(f"effect_method must be one of {EFFECT_METHODS}")
        if self.eval_model not in EVAL_MODELS:
            raise ConfigError(f"eval_model must be one of {EVAL_MODELS}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(f"format must be one of {OUTPUT_FORMATS}")
        if needs_inputs:
            for label, path in (("tweets", self.tweets), ("followers", self.followers), ("rules", self.rules)):
                if not path or not os.path.exists(path):
                    raise ConfigError(f"{label} file not found: {path}")
        return self
