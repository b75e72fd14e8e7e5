"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class TreeConfigModel(BaseModel):
    masking_check: Literal["exact", "approx"] = "approx"
    rotations: Literal["none", "masking", "full"] = "full"
    search: Literal["astar", "beam"] = "astar"
    beam_width: int = Field(default=5, ge=1)
    collapse_bound: Optional[int] = Field(default=None, ge=2)


class CreateTreeRequest(BaseModel):
    name: str = ""
    config: TreeConfigModel = TreeConfigModel()


class TreeInfo(BaseModel):
    tree_id: str
    name: str
    config: TreeConfigModel
    dim: Optional[int]
    num_points: int
    num_leaves: int
    max_depth: int
    balance: float


class PointModel(BaseModel):
    id: Optional[int] = Field(default=None, ge=0)
    features: list[float] = Field(min_length=1)
    label: Optional[str] = None


class InsertRequest(BaseModel):
    points: list[PointModel] = Field(min_length=1)


class InsertResponse(BaseModel):
    inserted: int
    num_points: int
    num_leaves: int
    max_depth: int


class SearchRequest(BaseModel):
    features: list[float] = Field(min_length=1)
    beam_width: Optional[int] = Field(default=None, ge=1,
                                      description="use beam search with this width instead of exact search")


class SearchResponse(BaseModel):
    nearest_point_id: int
    distance: float
    leaf_point_ids: list[int]
    expansions: int


class EvaluateRequest(BaseModel):
    dp: Literal["exact", "mc"] = "exact"
    mc_samples: int = Field(default=50000, ge=1)
    seed: int = 0


class EvaluateResponse(BaseModel):
    dendrogram_purity: float
    tree_balance: float
    max_depth: int
    n: int
    seconds: float


class ExtractRequest(BaseModel):
    k: int = Field(ge=1)


class ExtractResponse(BaseModel):
    k: int
    assignment: dict[int, int]


class ExportResponse(BaseModel):
    document: str


class ImportRequest(BaseModel):
    document: str
    name: str = ""
    points: Optional[list[PointModel]] = Field(
        default=None,
        description="optional point data to re-attach (required before further inserts or evaluation)",
    )


class MessageResponse(BaseModel):
    message: str
