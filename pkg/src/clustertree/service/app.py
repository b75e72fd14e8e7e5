"""FastAPI service holding long-lived cluster trees.

Each tree is an in-memory session: clients create one with a mode
configuration, stream points into it, and query it (nearest neighbor,
evaluation, flat extraction, export/import) while it grows.  Mutations on a
tree are serialized by a per-session lock, honoring the single-writer
contract of the underlying structure.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException

from ..dataio import attach_points, deserialize_tree, serialize_tree
from ..extraction import extract_flat
from ..metrics import (
    GroundTruth,
    UndefinedMetricError,
    dendrogram_purity_exact,
    dendrogram_purity_mc,
)
from ..rotation import insert, tree_balance
from ..search import nearest_neighbor_astar, nearest_neighbor_beam
from ..tree import ClusterTree, EmptyTreeError, ModeConfig, Point
from .schemas import (
    CreateTreeRequest,
    EvaluateRequest,
    EvaluateResponse,
    ExportResponse,
    ExtractRequest,
    ExtractResponse,
    ImportRequest,
    InsertRequest,
    InsertResponse,
    MessageResponse,
    PointModel,
    SearchRequest,
    SearchResponse,
    TreeConfigModel,
    TreeInfo,
)


@dataclass
class TreeSession:
    tree_id: str
    name: str
    tree: ClusterTree
    lock: threading.Lock = field(default_factory=threading.Lock)
    next_auto_id: int = 0


def _to_config(model: TreeConfigModel) -> ModeConfig:
    return ModeConfig(
        masking_check=model.masking_check,
        rotations=model.rotations,
        search=model.search,
        beam_width=model.beam_width,
        collapse_bound=model.collapse_bound,
    )


def _to_config_model(config: ModeConfig) -> TreeConfigModel:
    return TreeConfigModel(
        masking_check=config.masking_check,
        rotations=config.rotations,
        search=config.search,
        beam_width=config.beam_width,
        collapse_bound=config.collapse_bound,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="clustertree", description="online hierarchical clustering service")
    sessions: dict[str, TreeSession] = {}

    def get_session(tree_id: str) -> TreeSession:
        session = sessions.get(tree_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown tree {tree_id!r}")
        return session

    def info(session: TreeSession) -> TreeInfo:
        tree = session.tree
        return TreeInfo(
            tree_id=session.tree_id,
            name=session.name,
            config=_to_config_model(tree.config),
            dim=tree.dim,
            num_points=tree.num_points,
            num_leaves=tree.num_leaves,
            max_depth=tree.max_depth(),
            balance=tree_balance(tree),
        )

    @app.get("/health", response_model=MessageResponse)
    def health():
        return MessageResponse(message="ok")

    @app.post("/trees", response_model=TreeInfo, status_code=201)
    def create_tree(request: CreateTreeRequest):
        tree_id = uuid.uuid4().hex[:12]
        session = TreeSession(tree_id=tree_id, name=request.name,
                              tree=ClusterTree(_to_config(request.config)))
        sessions[tree_id] = session
        return info(session)

    @app.get("/trees", response_model=list[TreeInfo])
    def list_trees():
        return [info(s) for s in sessions.values()]

    @app.get("/trees/{tree_id}", response_model=TreeInfo)
    def get_tree(tree_id: str):
        return info(get_session(tree_id))

    @app.delete("/trees/{tree_id}", status_code=204)
    def delete_tree(tree_id: str):
        get_session(tree_id)
        del sessions[tree_id]

    def _make_point(session: TreeSession, model: PointModel) -> Point:
        pid = model.id
        if pid is None:
            while session.next_auto_id in session.tree.points:
                session.next_auto_id += 1
            pid = session.next_auto_id
            session.next_auto_id += 1
        return Point(pid, np.array(model.features), model.label)

    @app.post("/trees/{tree_id}/points", response_model=InsertResponse)
    def insert_points(tree_id: str, request: InsertRequest):
        session = get_session(tree_id)
        with session.lock:
            try:
                for model in request.points:
                    insert(session.tree, _make_point(session, model))
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from None
            tree = session.tree
            return InsertResponse(
                inserted=len(request.points),
                num_points=tree.num_points,
                num_leaves=tree.num_leaves,
                max_depth=tree.max_depth(),
            )

    @app.post("/trees/{tree_id}/search", response_model=SearchResponse)
    def search(tree_id: str, request: SearchRequest):
        session = get_session(tree_id)
        with session.lock:
            tree = session.tree
            try:
                if request.beam_width is not None:
                    result = nearest_neighbor_beam(tree, request.features, request.beam_width)
                else:
                    result = nearest_neighbor_astar(tree, request.features)
            except (EmptyTreeError, ValueError) as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from None
            query = np.asarray(request.features, dtype=float)
            nearest = min(
                result.leaf.point_ids,
                key=lambda pid: float(np.linalg.norm(tree.points[pid].features - query)),
            )
            return SearchResponse(
                nearest_point_id=nearest,
                distance=result.distance,
                leaf_point_ids=list(result.leaf.point_ids),
                expansions=result.expansions,
            )

    @app.post("/trees/{tree_id}/evaluate", response_model=EvaluateResponse)
    def evaluate(tree_id: str, request: EvaluateRequest):
        session = get_session(tree_id)
        with session.lock:
            tree = session.tree
            gt = GroundTruth({p.id: p.label for p in tree.points.values() if p.label is not None})
            started = time.perf_counter()
            try:
                if request.dp == "mc":
                    dp = dendrogram_purity_mc(tree, gt, m=request.mc_samples, seed=request.seed)
                else:
                    dp = dendrogram_purity_exact(tree, gt)
            except (UndefinedMetricError, ValueError) as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from None
            return EvaluateResponse(
                dendrogram_purity=dp,
                tree_balance=tree_balance(tree),
                max_depth=tree.max_depth(),
                n=tree.num_points,
                seconds=time.perf_counter() - started,
            )

    @app.post("/trees/{tree_id}/extract", response_model=ExtractResponse)
    def extract(tree_id: str, request: ExtractRequest):
        session = get_session(tree_id)
        with session.lock:
            try:
                flat = extract_flat(session.tree, request.k)
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from None
            return ExtractResponse(k=flat.k, assignment=flat.assignment)

    @app.get("/trees/{tree_id}/export", response_model=ExportResponse)
    def export(tree_id: str):
        session = get_session(tree_id)
        with session.lock:
            return ExportResponse(document=serialize_tree(session.tree))

    @app.post("/trees/import", response_model=TreeInfo, status_code=201)
    def import_tree(request: ImportRequest):
        try:
            tree = deserialize_tree(request.document)
            if request.points is not None:
                attach_points(
                    tree,
                    [Point(m.id, np.array(m.features), m.label) for m in request.points],
                )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        tree_id = uuid.uuid4().hex[:12]
        session = TreeSession(tree_id=tree_id, name=request.name, tree=tree)
        if tree.points:
            session.next_auto_id = max(tree.points) + 1
        sessions[tree_id] = session
        return info(session)

    return app


app = create_app()
