"""Pipeline configuration: JSON file plus command-line overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

from trajmine.clustering import StepwiseParams


@dataclass
class PipelineConfig:
    input: str | None = None
    alphabet: str | None = None
    out: str = "out"
    seed: int | None = None
    # clustering
    p_threshold: float = 0.01
    internal_support: float = 0.5
    min_subseq_len: int = 2
    max_groups: int = 16
    min_group_size: int = 30
    candidate_top_k: int = 50
    linkage: str = "nn_chain"
    # mining
    min_support: float = 0.05
    max_len: int = 4
    # markov
    prob_threshold: float = 0.1
    freq_threshold: int = 30
    workers: int | None = None

    def validate(self) -> "PipelineConfig":
        if not 0 < self.p_threshold <= 1:
            raise ValueError(f"p_threshold must be in (0, 1], got {self.p_threshold}")
        for name in ("internal_support", "min_support", "prob_threshold"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        for name in ("min_subseq_len", "max_groups", "min_group_size", "max_len", "freq_threshold",
                     "candidate_top_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.linkage not in ("nn_chain", "greedy"):
            raise ValueError(f"linkage must be nn_chain or greedy, got {self.linkage!r}")
        return self

    def stepwise_params(self) -> StepwiseParams:
        return StepwiseParams(
            p_threshold=self.p_threshold,
            internal_support_threshold=self.internal_support,
            min_subseq_len=self.min_subseq_len,
            max_groups=self.max_groups,
            min_group_size=self.min_group_size,
            candidate_min_support=self.min_support,
            candidate_max_len=self.max_len,
            candidate_top_k=self.candidate_top_k,
        )

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**data)

    @classmethod
    def load(cls, path, **overrides) -> "PipelineConfig":
        data = {}
        if path:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data).validate()
