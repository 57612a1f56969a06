"""FastAPI application exposing a read-only view of a census store."""

from __future__ import annotations

from dataclasses import asdict
from typing import Optional

from fastapi import Depends, FastAPI, Header, HTTPException, status

from .census import CensusService, SurfaceClassOverflow, dessin_from_record
from .config import Settings, load_settings
from .signatures import NonHyperbolicSignature, Signature, admissible_signatures
from .store import IncompleteStoreError


def _record_view(record) -> dict[str, object]:
    payload = record.to_dict()
    payload.pop("table")
    payload["dessin"] = dessin_from_record(record)
    return payload


def create_app(settings: Optional[Settings] = None) -> FastAPI:
    settings = settings or load_settings()
    service = CensusService(settings)

    async def verify_api_key(x_api_key: Optional[str] = Header(None, alias="X-API-Key")) -> None:
        if settings.api_key and x_api_key != settings.api_key:
            raise HTTPException(status_code=status.HTTP_401_UNAUTHORIZED, detail="invalid api key")

    def signature_dependency(signature: Optional[str] = None) -> Optional[Signature]:
        if not signature:
            return None
        try:
            return Signature.parse(signature)
        except NonHyperbolicSignature as exc:
            raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(exc)) from exc

    def get_service() -> CensusService:
        return service

    def incomplete(exc: IncompleteStoreError) -> HTTPException:
        return HTTPException(
            status_code=status.HTTP_409_CONFLICT,
            detail={"error": "incomplete store", "missing_units": exc.missing_units},
        )

    def overflow(exc: SurfaceClassOverflow) -> HTTPException:
        return HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail={"error": "surface class overflow", "key": exc.key, "members": exc.members},
        )

    app = FastAPI(title="Dessin Census API", version="1.0.0")

    @app.get("/healthz")
    async def healthcheck() -> dict[str, str]:
        return {"status": "ok"}

    @app.get("/api/signatures")
    async def get_signatures(
        max_genus: Optional[int] = None,
        _: None = Depends(verify_api_key),
    ) -> dict[str, object]:
        limit = max_genus or settings.max_genus
        if limit < 2:
            raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail="max_genus must be at least 2")
        return {
            "max_genus": limit,
            "signatures": [
                {"signature": str(sig), "pairs": [{"genus": pair.genus, "index": pair.index} for pair in pairs]}
                for sig, pairs in admissible_signatures(limit)
            ],
        }

    @app.get("/api/units")
    async def get_units(
        _: None = Depends(verify_api_key),
        svc: CensusService = Depends(get_service),
    ) -> dict[str, object]:
        store = svc.store_for(settings.max_genus)
        units = [
            {**asdict(status_), "signature": str(status_.signature), "unit": unit_id}
            for unit_id, status_ in store.units().items()
        ]
        return {"g_max": store.g_max, "units": units, "missing": store.missing_units()}

    @app.get("/api/records")
    async def get_records(
        genus: Optional[int] = None,
        sig: Optional[Signature] = Depends(signature_dependency),
        _: None = Depends(verify_api_key),
        svc: CensusService = Depends(get_service),
    ) -> dict[str, object]:
        records = svc.store_for(settings.max_genus).records(genus=genus, signature=sig)
        return {"count": len(records), "records": [_record_view(record) for record in records]}

    @app.get("/api/records/{key}")
    async def get_record(
        key: str,
        _: None = Depends(verify_api_key),
        svc: CensusService = Depends(get_service),
    ) -> dict[str, object]:
        record = svc.store_for(settings.max_genus).get_record(key)
        if record is None:
            raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail="record not found")
        return _record_view(record)

    # Closure work is CPU bound, so these run in the threadpool.
    @app.get("/api/counts/{g}")
    def get_counts(
        g: int,
        classes: bool = False,
        _: None = Depends(verify_api_key),
        svc: CensusService = Depends(get_service),
    ) -> dict[str, object]:
        try:
            report = svc.counts(g, with_classes=classes)
        except IncompleteStoreError as exc:
            raise incomplete(exc) from exc
        except SurfaceClassOverflow as exc:
            raise overflow(exc) from exc
        return {**asdict(report), "S": report.s}

    @app.get("/api/conventions/{g}")
    def get_conventions(
        g: int,
        _: None = Depends(verify_api_key),
        svc: CensusService = Depends(get_service),
    ) -> dict[str, object]:
        try:
            result = svc.convention_counts(g)
        except IncompleteStoreError as exc:
            raise incomplete(exc) from exc
        except SurfaceClassOverflow as exc:
            raise overflow(exc) from exc
        return asdict(result)

    @app.get("/api/bounds/{g}")
    def get_bounds(
        g: int,
        classes: bool = True,
        _: None = Depends(verify_api_key),
        svc: CensusService = Depends(get_service),
    ) -> dict[str, object]:
        try:
            rows = svc.bounds(g, with_classes=classes)
        except IncompleteStoreError as exc:
            raise incomplete(exc) from exc
        except SurfaceClassOverflow as exc:
            raise overflow(exc) from exc
        return {"g": g, "rows": [asdict(row) for row in rows]}

    @app.get("/api/dessins")
    async def get_dessins(
        genus: Optional[int] = None,
        sig: Optional[Signature] = Depends(signature_dependency),
        _: None = Depends(verify_api_key),
        svc: CensusService = Depends(get_service),
    ) -> dict[str, object]:
        try:
            dessins = svc.export_dessins(genus, sig)
        except IncompleteStoreError as exc:
            raise incomplete(exc) from exc
        return {"count": len(dessins), "dessins": dessins}

    return app


__all__ = ["create_app"]
