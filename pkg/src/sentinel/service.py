"""HTTP service: scheduled detection windows plus the triage API.

One process owns the stores. A background scheduler (or an explicit
``POST /infer``) runs the two-stage pipeline over the most recent window
and commits the result atomically; API reads only ever see committed
windows. Operator actions arrive over HTTP: verdicts append to the
feedback log before the request is acknowledged, and risk-factor changes
are audit-logged and apply to subsequent windows only.

Desk-scale deployments produce far too few points per window to fit a
tail on, so the pipeline is calibrated on in-sample context scores (the
same scores the forecaster was judged on during the lead-in) whenever the
window's own sample is too thin. Fleet-scale windows self-calibrate.
"""

# No `from __future__ import annotations` here: the HTTP layer's request
# handlers are closures, and stringified annotations would stop the web
# framework from resolving their parameter types.

import json
import logging
import math
import os
import socket
import threading
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from typing import Optional

from .detect import BandConfig
from .errors import (
    BindFailure,
    ConfigInvalid,
    EmptyInput,
    NotFound,
    OutOfRange,
    SchemaViolation,
    SentinelError,
)
from .evt import EvtConfig, FitMethod
from .forecast import (
    ConvNetForecaster,
    ForecastModel,
    SeasonalNaiveForecaster,
    TrainConfig,
    TrainReport,
    load_model,
    save_model,
)
from .ingest import parse_metric_json
from .pipeline import PipelineConfig, quantile_sweep, run_window, sweep_evt, window_id_for
from .records import ReportStore, Tier, Verdict
from .series import ImputationPolicy, RegularSeries
from .store import SeriesStore
from .timeutil import floor_to_interval, format_rfc3339, parse_rfc3339, utc_now

__all__ = ["ServiceConfig", "load_config", "Service", "create_app", "serve"]

log = logging.getLogger("sentinel.service")

CONFIG_ENV = "SENTINEL_CONFIG"
# Test hook: seconds to sleep between staging a window and committing it.
COMMIT_DELAY_ENV = "SENTINEL_COMMIT_DELAY_S"

_IMPUTATION_NAMES = {p.value: p for p in ImputationPolicy}
_TIER_NAMES = {"high": Tier.HIGH, "low": Tier.LOW, "all": None}
_VERDICT_NAMES = {
    "confirmed": Verdict.CONFIRMED,
    "false_flag": Verdict.FALSE_FLAG,
    "falseflag": Verdict.FALSE_FLAG,
}


def _default_forecaster() -> dict:
    return {"kind": "seasonal_naive", "period": 24}


@dataclass(frozen=True)
class ServiceConfig:
    """Everything the service needs, validated on construction.

    Durations are seconds. Store paths are taken as given; ``load_config``
    resolves relative paths against the config file's directory.
    """

    series_store: str = "var/series"
    report_store: str = "var/reports"
    model_path: str = "var/model.json"
    listen_host: str = "127.0.0.1"
    listen_port: int = 8787
    inference_interval_s: float = 3600.0
    training_window_s: float = 7 * 24 * 3600.0
    ingest_interval_s: float = 3600.0
    forecaster: dict = field(default_factory=_default_forecaster)
    band: BandConfig = field(default_factory=BandConfig)
    evt: EvtConfig = field(default_factory=EvtConfig)
    imputation: ImputationPolicy = ImputationPolicy.MEDIAN
    ui_dir: str = ""
    scheduler: bool = True

    def __post_init__(self):
        for name in ("inference_interval_s", "training_window_s", "ingest_interval_s"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigInvalid(f"{name} must be a positive duration, got {value!r}",
                                    field=name)
        if not (0 < self.listen_port < 65536):
            raise ConfigInvalid(f"listen_port must be in (0, 65536), got {self.listen_port}",
                                field="listen_port")
        kind = self.forecaster.get("kind")
        if kind not in ("seasonal_naive", "conv"):
            raise ConfigInvalid(f"unknown forecaster kind {kind!r}", field="forecaster.kind")
        if kind == "seasonal_naive":
            period = self.forecaster.get("period", 24)
            if not (isinstance(period, int) and period >= 1):
                raise ConfigInvalid(f"forecaster.period must be a positive integer, got {period!r}",
                                    field="forecaster.period")

    def interval(self) -> timedelta:
        return timedelta(seconds=self.inference_interval_s)

    def to_json(self) -> dict:
        return {
            "series_store": self.series_store,
            "report_store": self.report_store,
            "model_path": self.model_path,
            "listen": {"host": self.listen_host, "port": self.listen_port},
            "inference_interval_s": self.inference_interval_s,
            "training_window_s": self.training_window_s,
            "ingest_interval_s": self.ingest_interval_s,
            "forecaster": dict(self.forecaster),
            "band": {
                "quantile": self.band.quantile,
                "z_override": self.band.z_override,
                "two_sided": self.band.two_sided,
            },
            "evt": {
                "risk_q": self.evt.risk_q,
                "init_quantile": self.evt.init_quantile,
                "min_excesses": self.evt.min_excesses,
                "fit_method": self.evt.fit_method.value,
            },
            "imputation": self.imputation.value,
            "ui_dir": self.ui_dir,
            "scheduler": self.scheduler,
        }

    @classmethod
    def from_json(cls, obj: dict, base_dir: str = ".") -> "ServiceConfig":
        if not isinstance(obj, dict):
            raise ConfigInvalid("config document must be a JSON object")
        known = {
            "series_store", "report_store", "model_path", "listen",
            "inference_interval_s", "training_window_s", "ingest_interval_s",
            "forecaster", "band", "evt", "imputation", "ui_dir", "scheduler",
        }
        for key in obj:
            if key not in known:
                raise ConfigInvalid(f"unknown config field {key!r}", field=key)
        defaults = cls()

        def resolve(path: str) -> str:
            return path if os.path.isabs(path) else os.path.join(base_dir, path)

        listen = obj.get("listen", {})
        if not isinstance(listen, dict):
            raise ConfigInvalid("listen must be an object", field="listen")

        def sub(section: str, raw, builder, fields: dict):
            if not isinstance(raw, dict):
                raise ConfigInvalid(f"{section} must be an object", field=section)
            for key in raw:
                if key not in fields:
                    raise ConfigInvalid(f"unknown config field {section}.{key}", field=f"{section}.{key}")
            kwargs = {name: conv(raw[name]) for name, conv in fields.items() if name in raw}
            try:
                return builder(**kwargs)
            except (OutOfRange, TypeError, ValueError) as e:
                field_name = getattr(e, "field", "") or next(iter(kwargs), "")
                raise ConfigInvalid(str(e), field=f"{section}.{field_name}") from e

        band = sub("band", obj.get("band", {}), BandConfig, {
            "quantile": float,
            "z_override": lambda v: None if v is None else float(v),
            "two_sided": bool,
        })
        evt = sub("evt", obj.get("evt", {}), EvtConfig, {
            "risk_q": float,
            "init_quantile": float,
            "min_excesses": int,
            "fit_method": FitMethod,
        })
        imputation_name = obj.get("imputation", defaults.imputation.value)
        if imputation_name not in _IMPUTATION_NAMES:
            raise ConfigInvalid(f"unknown imputation policy {imputation_name!r}", field="imputation")
        forecaster = obj.get("forecaster", _default_forecaster())
        if not isinstance(forecaster, dict):
            raise ConfigInvalid("forecaster must be an object", field="forecaster")
        ui_dir = str(obj.get("ui_dir", ""))

        def num(name: str, value) -> float:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigInvalid(f"{name} must be a number, got {value!r}", field=name)
            return float(value)

        return cls(
            series_store=resolve(str(obj.get("series_store", defaults.series_store))),
            report_store=resolve(str(obj.get("report_store", defaults.report_store))),
            model_path=resolve(str(obj.get("model_path", defaults.model_path))),
            listen_host=str(listen.get("host", defaults.listen_host)),
            listen_port=int(listen.get("port", defaults.listen_port)),
            inference_interval_s=num("inference_interval_s",
                                     obj.get("inference_interval_s", defaults.inference_interval_s)),
            training_window_s=num("training_window_s",
                                  obj.get("training_window_s", defaults.training_window_s)),
            ingest_interval_s=num("ingest_interval_s",
                                  obj.get("ingest_interval_s", defaults.ingest_interval_s)),
            forecaster=forecaster,
            band=band,
            evt=evt,
            imputation=_IMPUTATION_NAMES[imputation_name],
            ui_dir=resolve(ui_dir) if ui_dir else "",
            scheduler=bool(obj.get("scheduler", defaults.scheduler)),
        )


def load_config(path: Optional[str] = None) -> ServiceConfig:
    """Read a config file; ``SENTINEL_CONFIG`` overrides when no path is
    given, and with neither the built-in defaults apply."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return ServiceConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as e:
        raise ConfigInvalid(f"cannot read config file {path}: {e}") from e
    try:
        obj = json.loads(raw)
    except ValueError as e:
        raise ConfigInvalid(f"config file {path} is not valid JSON: {e}") from e
    return ServiceConfig.from_json(obj, base_dir=os.path.dirname(os.path.abspath(path)))


class Service:
    """The engine behind the HTTP app; also driven directly by the CLI.

    Concurrency: one pipeline execution at a time (``_run_lock``), verdict
    writes serialized (``_feedback_lock``), reads lock-free against
    committed files.
    """

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.series_store = SeriesStore(config.series_store)
        self.report_store = ReportStore(config.report_store)
        self._model: Optional[ForecastModel] = None
        self._risk_q = config.evt.risk_q
        self._risk_audit_path = os.path.join(config.report_store, "risk_audit.jsonl")
        self._replay_risk_audit()
        self._run_lock = threading.Lock()
        self._feedback_lock = threading.Lock()
        self._stop = threading.Event()
        self._scheduler_thread: Optional[threading.Thread] = None
        delay = float(os.environ.get(COMMIT_DELAY_ENV, "0") or 0.0)
        if delay > 0:
            self.report_store.pre_commit_hook = lambda: time.sleep(delay)

    # -- risk factor ----------------------------------------------------------

    def _replay_risk_audit(self) -> None:
        if not os.path.exists(self._risk_audit_path):
            return
        with open(self._risk_audit_path, "rb") as fh:
            for line in fh.read().split(b"\n"):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line.decode("utf-8"))
                    self._risk_q = float(entry["value"])
                except (ValueError, KeyError, UnicodeDecodeError):
                    break  # torn tail; the change was never acknowledged

    @property
    def risk_q(self) -> float:
        return self._risk_q

    def set_risk_q(self, q: float) -> EvtConfig:
        """Change the tail risk for subsequent windows; committed tiers are
        immutable. The change is audit-logged before it takes effect."""
        if not (isinstance(q, (int, float)) and 0.0 < q < 0.5):
            raise OutOfRange(f"risk factor must be in (0, 0.5), got {q!r}", field="risk_q")
        entry = {
            "at": format_rfc3339(utc_now()),
            "previous": self._risk_q,
            "value": float(q),
        }
        line = json.dumps(entry, sort_keys=True).encode("utf-8") + b"\n"
        with open(self._risk_audit_path, "ab") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
        self._risk_q = float(q)
        return self.effective_evt()

    def effective_evt(self) -> EvtConfig:
        return replace(self.config.evt, risk_q=self._risk_q)

    # -- model ----------------------------------------------------------------

    @property
    def model_loaded(self) -> bool:
        return self._model is not None or os.path.exists(self.config.model_path)

    def _require_model(self) -> ForecastModel:
        if self._model is None:
            self._model = load_model(self.config.model_path)
        return self._model

    def _build_forecaster(self) -> ForecastModel:
        spec = dict(self.config.forecaster)
        kind = spec.pop("kind")
        if kind == "seasonal_naive":
            return SeasonalNaiveForecaster(period=int(spec.get("period", 24)))
        try:
            return ConvNetForecaster(TrainConfig(**spec))
        except TypeError as e:
            raise ConfigInvalid(str(e), field="forecaster") from e

    def _min_train_len(self, model: ForecastModel) -> int:
        if isinstance(model, SeasonalNaiveForecaster):
            return 2 * model.period
        if isinstance(model, ConvNetForecaster):
            return model.config.receptive_field + 1
        return 2

    def train(self, end: Optional[datetime] = None,
              metric: Optional[str] = None) -> TrainReport:
        """Fit the configured forecaster on the training window ending at
        ``end`` (default: now, floored to the inference grid) and persist it.
        ``metric`` restricts training to series with that metric name."""
        end = end or floor_to_interval(utc_now(), self.config.interval())
        start = end - timedelta(seconds=self.config.training_window_s)
        model = self._build_forecaster()
        min_len = self._min_train_len(model)
        series = []
        for key in self.series_store.keys():
            if metric is not None and key.metric_name != metric:
                continue
            s = self.series_store.read(key, start, end)
            if s is not None and len(s.values) >= min_len:
                series.append(s)
        if not series:
            raise EmptyInput("no stored series long enough to train on")
        report = model.fit(series)
        save_model(model, self.config.model_path)
        self._model = model
        return report

    # -- ingest -----------------------------------------------------------------

    def ingest_document(self, body: bytes) -> dict:
        entries = parse_metric_json(body)
        interval = timedelta(seconds=self.config.ingest_interval_s)
        points = 0
        for key, pts in entries:
            points += self.series_store.append_points(key, interval, pts)
        return {"series": len(entries), "points": points}

    # -- inference ----------------------------------------------------------------

    def _context_calibration(self, series, model, window_start: datetime) -> Optional[list]:
        """In-sample scores over the lead-in, for windows too thin to
        self-calibrate. Returns None when any series lacks scan support."""
        scores: list = []
        for s in series:
            ctx = s.slice_time(s.start, window_start)
            scan = getattr(model, "one_step_scan", None)
            if scan is None:
                return None
            try:
                pairs = scan(ctx)
            except SentinelError:
                continue
            for value, pair in zip(ctx.values, pairs):
                if value is None or pair is None:
                    continue
                mu, sigma = pair
                scores.append(abs(value - mu) / sigma)
        return scores or None

    def run_window_at(self, window_start: datetime) -> "WindowOutcome":
        """Run and commit the window starting at ``window_start``.

        The window's end is one inference interval later. Series context is
        read back one training window. The tail fit self-calibrates on the
        window's scores when there are enough of them, otherwise on
        in-sample context scores.
        """
        from .pipeline import WindowResult  # local to avoid cycle at import time

        with self._run_lock:
            model = self._require_model()
            window_start = floor_to_interval(window_start, self.config.interval())
            window_end = window_start + self.config.interval()
            ctx_start = window_start - timedelta(seconds=self.config.training_window_s)
            evt = self.effective_evt()
            series = []
            window_points = 0
            for key in self.series_store.keys():
                s = self.series_store.read(key, ctx_start, window_end)
                if s is None or s.end <= window_start or s.start >= window_end:
                    continue
                series.append(s)
                w = s.slice_time(window_start, min(window_end, s.end))
                window_points += sum(1 for v in w.values if v is not None)

            needed = math.ceil(evt.min_excesses / (1.0 - evt.init_quantile))
            calibration = None
            if window_points < needed:
                calibration = self._context_calibration(series, model, window_start)

            config = PipelineConfig(
                band=self.config.band, evt=evt, imputation=self.config.imputation
            )
            result: WindowResult = run_window(
                series, model, window_start, window_end, config,
                calibration_scores=calibration,
            )
            # Persist the sample the tail was (or would be) fit on so later
            # strictness sweeps see the same distribution the window saw.
            fit_sample = calibration if calibration is not None else list(result.scores)
            self.report_store.commit_window(
                result.funnel.window_id, result.records, fit_sample,
                result.funnel.to_json(),
            )
            return WindowOutcome(result=result, calibrated_on_context=calibration is not None)

    # -- reads -----------------------------------------------------------------

    def funnel_report(self, window_ref: str) -> dict:
        return self.report_store.funnel(self._window_id(window_ref))

    def sweep_report(self, window_ref: str, quantiles) -> list:
        scores = self.report_store.scores(self._window_id(window_ref))
        # Preview fits need headroom below the sweep grid, and the stored
        # sample may be modest; sweep_evt trades threshold height for excess
        # count so the fit stays workable.
        return quantile_sweep(scores, sweep_evt(self.effective_evt(), len(scores)), quantiles)

    @staticmethod
    def _window_id(window_ref: str) -> str:
        try:
            return window_id_for(parse_rfc3339(window_ref))
        except ValueError:
            return window_ref

    def anomaly_context(self, rec_id: str, span: timedelta = timedelta(hours=6)) -> dict:
        """The record plus its surrounding series values and, when a model
        is available, the per-position forecast band."""
        rec = self.report_store.get_record(rec_id)
        lead = timedelta(seconds=self.config.training_window_s)
        s = self.series_store.read(rec.key, rec.timestamp - span - lead,
                                   rec.timestamp + span + self.config.interval())
        if s is None:
            raise NotFound(f"series for record {rec_id!r} is not in the store")
        return self._context_payload(rec, s, span)

    def _context_payload(self, rec, s: RegularSeries, span: timedelta) -> dict:
        scan_pairs = None
        try:
            model = self._require_model()
            scan = getattr(model, "one_step_scan", None)
            if scan is not None:
                scan_pairs = scan(s)
        except SentinelError:
            # No model or unsupported context: values render without a band.
            scan_pairs = None
        lo = s.slice_time(rec.timestamp - span, rec.timestamp + span + s.interval)
        offset = round((lo.start - s.start).total_seconds() / s.interval.total_seconds())
        points = []
        for i, value in enumerate(lo.values):
            pair = scan_pairs[offset + i] if scan_pairs is not None else None
            points.append({
                "timestamp": format_rfc3339(lo.timestamp_at(i)),
                "value": value,
                "mu": None if pair is None else pair[0],
                "sigma": None if pair is None else pair[1],
            })
        return {
            "record": rec.to_json(),
            "band_z": self.config.band.z,
            "z_q": rec.z_q_at_detection,
            "interval_s": s.interval.total_seconds(),
            "points": points,
        }

    def feedback(self, rec_id: str, verdict_name: str) -> dict:
        name = str(verdict_name).strip().lower()
        if name not in _VERDICT_NAMES:
            raise SchemaViolation(
                f"verdict must be one of confirmed, false_flag; got {verdict_name!r}",
                path="$.verdict",
            )
        with self._feedback_lock:
            rec = self.report_store.record_verdict(rec_id, _VERDICT_NAMES[name])
        return rec.to_json()

    # -- scheduler ----------------------------------------------------------------

    def start_scheduler(self) -> None:
        if self._scheduler_thread is not None:
            return
        self._stop.clear()
        t = threading.Thread(target=self._scheduler_loop, name="sentinel-scheduler",
                             daemon=True)
        self._scheduler_thread = t
        t.start()

    def stop_scheduler(self) -> None:
        self._stop.set()
        if self._scheduler_thread is not None:
            self._scheduler_thread.join(timeout=5.0)
            self._scheduler_thread = None

    def _scheduler_loop(self) -> None:
        poll = min(5.0, self.config.inference_interval_s / 10.0)
        while not self._stop.wait(poll):
            target = floor_to_interval(utc_now(), self.config.interval()) - self.config.interval()
            wid = window_id_for(target)
            if wid in self.report_store.committed_windows():
                continue
            if not self.series_store.keys():
                continue
            try:
                if not self.model_loaded:
                    self.train(end=target)
                self.run_window_at(target)
                log.info("scheduled window %s committed", wid)
            except SentinelError as e:
                log.warning("scheduled window %s skipped: %s", wid, e)


@dataclass(frozen=True)
class WindowOutcome:
    result: object
    calibrated_on_context: bool


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

_STATUS_BY_CODE = {
    "NotFound": 404,
    "VerdictConflict": 409,
    "NoModel": 409,
    "IoError": 500,
}


def _error_payload(e: SentinelError) -> dict:
    payload = {"code": e.code, "message": str(e)}
    detail = getattr(e, "field", "") or getattr(e, "path", "")
    if detail:
        payload["field"] = detail
    return payload


def create_app(service: Service):
    from fastapi import FastAPI, Query, Request
    from fastapi.responses import JSONResponse, RedirectResponse
    from fastapi.concurrency import run_in_threadpool

    app = FastAPI(title="sentinel", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.service = service

    @app.exception_handler(SentinelError)
    async def _sentinel_error(_request: Request, exc: SentinelError):
        return JSONResponse(status_code=_STATUS_BY_CODE.get(exc.code, 400),
                            content=_error_payload(exc))

    @app.get("/api/v1/health")
    def health():
        return {"status": "ok", "model_loaded": service.model_loaded}

    @app.post("/api/v1/ingest")
    async def ingest(request: Request):
        body = await request.body()
        return await run_in_threadpool(service.ingest_document, body)

    @app.post("/api/v1/infer")
    async def infer(window: str = Query(...)):
        try:
            start = parse_rfc3339(window)
        except ValueError as e:
            raise SchemaViolation(f"window must be RFC3339: {e}", path="$.window") from e
        outcome = await run_in_threadpool(service.run_window_at, start)
        payload = outcome.result.funnel.to_json()
        payload["calibrated_on_context"] = outcome.calibrated_on_context
        return payload

    def _parse_ts(name: str, raw: Optional[str]) -> Optional[datetime]:
        if raw is None or raw == "":
            return None
        try:
            return parse_rfc3339(raw)
        except ValueError as e:
            raise SchemaViolation(f"{name} must be RFC3339: {e}", path=f"$.{name}") from e

    @app.get("/api/v1/anomalies")
    def anomalies(
        tier: str = "all",
        from_: Optional[str] = Query(None, alias="from"),
        to: Optional[str] = None,
        window: Optional[str] = None,
    ):
        if tier not in _TIER_NAMES:
            raise OutOfRange(f"tier must be high, low, or all; got {tier!r}", field="tier")
        records = service.report_store.records(
            window_id=Service._window_id(window) if window else None,
            tier=_TIER_NAMES[tier],
            start=_parse_ts("from", from_),
            end=_parse_ts("to", to),
        )
        return {"count": len(records), "records": [r.to_json() for r in records]}

    @app.get("/api/v1/anomalies/{rec_id}/context")
    def anomaly_context(rec_id: str):
        return service.anomaly_context(rec_id)

    @app.post("/api/v1/feedback")
    async def feedback(request: Request):
        try:
            body = json.loads(await request.body())
        except ValueError as e:
            raise SchemaViolation(f"feedback body must be JSON: {e}", path="$") from e
        if not isinstance(body, dict) or "id" not in body or "verdict" not in body:
            raise SchemaViolation("feedback body needs id and verdict fields", path="$")
        return await run_in_threadpool(service.feedback, str(body["id"]), str(body["verdict"]))

    @app.get("/api/v1/config/risk-factor")
    def get_risk_factor():
        return {"risk_q": service.risk_q, "quantile": 1.0 - service.risk_q}

    @app.put("/api/v1/config/risk-factor")
    async def put_risk_factor(request: Request):
        try:
            body = json.loads(await request.body())
        except ValueError as e:
            raise SchemaViolation(f"risk-factor body must be JSON: {e}", path="$") from e
        if not isinstance(body, dict):
            raise SchemaViolation("risk-factor body must be an object", path="$")
        previous = service.risk_q
        if "risk_q" in body:
            value = body["risk_q"]
        elif "quantile" in body:
            q = body["quantile"]
            if not isinstance(q, (int, float)) or isinstance(q, bool):
                raise SchemaViolation(f"quantile must be a number, got {q!r}", path="$.quantile")
            value = 1.0 - float(q)
        else:
            raise SchemaViolation("risk-factor body needs risk_q or quantile", path="$")
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SchemaViolation(f"risk_q must be a number, got {value!r}", path="$.risk_q")
        evt = service.set_risk_q(float(value))
        return {"risk_q": evt.risk_q, "quantile": 1.0 - evt.risk_q, "previous": previous}

    @app.get("/api/v1/reports/funnel")
    def funnel(window: Optional[str] = None):
        if window is None:
            return {"windows": service.report_store.committed_windows()}
        return service.funnel_report(window)

    @app.get("/api/v1/reports/sweep")
    def sweep(window: str = Query(...), grid: str = Query(...)):
        try:
            quantiles = [float(tok) for tok in grid.split(",") if tok.strip()]
        except ValueError as e:
            raise SchemaViolation(f"grid must be comma-separated numbers: {e}",
                                  path="$.grid") from e
        if not quantiles:
            raise SchemaViolation("grid must name at least one quantile", path="$.grid")
        return {"rows": service.sweep_report(window, quantiles)}

    if service.config.ui_dir and os.path.isdir(service.config.ui_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=service.config.ui_dir, html=True), name="ui")

        @app.get("/")
        def root():
            return RedirectResponse(url="/ui/")

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted. Scheduling starts only when the
    config asks for it; the bind address is checked before startup so a
    taken port fails fast as :class:`BindFailure`."""
    import uvicorn

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((config.listen_host, config.listen_port))
    except OSError as e:
        raise BindFailure(
            f"cannot bind {config.listen_host}:{config.listen_port}: {e}"
        ) from e
    finally:
        probe.close()

    service = Service(config)
    app = create_app(service)
    if config.scheduler:
        service.start_scheduler()
    try:
        uvicorn.run(app, host=config.listen_host, port=config.listen_port,
                    log_level="warning")
    finally:
        service.stop_scheduler()
