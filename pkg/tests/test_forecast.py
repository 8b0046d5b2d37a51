"""Load forecasting: effort heuristic, feature families, OLS fits, remote scoring."""
import json
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from cemsim import (
    ConfigurationError,
    ContextRecord,
    NUMERIC_FIELD_CATALOG,
    Predictor,
    RemoteEstimatorError,
    build_features,
    estimate_effort_heuristic,
    estimate_effort_remote,
    evaluate_families,
    feature_names,
    fit_least_squares,
    rmse,
    train_predictor,
)
from cemsim.models.synthetic import (
    JOB_TEMPLATES,
    SyntheticScenarioConfig,
    context_records_for_jobs,
    generate_job_events,
    load_power_at,
)

NS_PER_HOUR = 3_600_000_000_000
NS_PER_DAY = 24 * NS_PER_HOUR


def _record(begins_h, ends_h, text, recorded_h=0.0, **numeric):
    payload = {"text": text, **numeric}
    return ContextRecord(
        recorded_at_ns=int(recorded_h * NS_PER_HOUR),
        begins_at_ns=int(begins_h * NS_PER_HOUR),
        ends_at_ns=int(ends_h * NS_PER_HOUR),
        subsystem_id=1,
        payload=payload,
    )


# ---------------------------------------------------------------------------
# Effort heuristic
# ---------------------------------------------------------------------------


def test_heuristic_scores_worked_examples():
    assert estimate_effort_heuristic("CPU-intensive, multi-core numeric robustness test") == 4.0
    assert estimate_effort_heuristic("Extending test to 48h (multi-core numeric robustness)") == 4.0
    assert estimate_effort_heuristic("GPU training run with a nightly build step") == 5.0
    assert estimate_effort_heuristic("") == 1.0
    assert estimate_effort_heuristic("routine telemetry rotation") == 1.0


def test_heuristic_is_case_insensitive():
    assert estimate_effort_heuristic("gpu COMPILE") == estimate_effort_heuristic("GPU compile") == 5.0


def test_heuristic_counts_repeated_keywords():
    assert estimate_effort_heuristic("build then build again") == 3.0


def test_duration_token_scales_the_score():
    # (1 + 1) * 12/24
    assert estimate_effort_heuristic("6h compile") == 2.0 * 6.0 / 24.0
    assert estimate_effort_heuristic("12h compile") == 1.0


def test_job_templates_agree_with_the_heuristic():
    """Every canned job description scores exactly its template effort."""
    for effort, texts in JOB_TEMPLATES.items():
        for text in texts:
            assert estimate_effort_heuristic(text) == effort, text


# ---------------------------------------------------------------------------
# Feature construction
# ---------------------------------------------------------------------------


def test_feature_names_per_family():
    assert feature_names("none") == ("intercept", "hour_sin", "hour_cos")
    assert feature_names("effort") == ("intercept", "hour_sin", "hour_cos", "effort")
    assert feature_names("numeric") == (
        "intercept", "hour_sin", "hour_cos",
        "cores_sum", "cores_present", "files_sum", "files_present",
    )
    assert feature_names("combined") == feature_names("numeric") + ("effort",)
    with pytest.raises(ValueError):
        feature_names("fancy")


def test_effort_feature_sums_active_records():
    records = [
        _record(2, 8, "CPU-intensive, multi-core numeric robustness test"),  # 4.0
        _record(3, 6, "Incremental build of the firmware tree"),  # 2.0
        _record(20, 23, "GPU training run with a nightly build step"),  # inactive
    ]
    features = build_features(records, "effort", 4 * NS_PER_HOUR)
    assert features[-1] == 6.0
    assert build_features(records, "effort", 21 * NS_PER_HOUR)[-1] == 5.0
    assert build_features(records, "effort", 10 * NS_PER_HOUR)[-1] == 0.0


def test_none_family_ignores_records_entirely():
    records = [_record(0, 24, "GPU blitz", cores=64)]
    t = 5 * NS_PER_HOUR
    assert np.array_equal(build_features(records, "none", t), build_features([], "none", t))


def test_numeric_features_sum_fields_and_flag_presence():
    records = [
        _record(0, 10, "a", cores=8, files=400),
        _record(0, 10, "b", cores=4),
        _record(0, 10, "c", cores="many"),  # non-numeric: ignored
    ]
    features = build_features(records, "numeric", NS_PER_HOUR)
    names = feature_names("numeric")
    byname = dict(zip(names, features))
    assert byname["cores_sum"] == 12.0
    assert byname["cores_present"] == 1.0
    assert byname["files_sum"] == 400.0
    assert byname["files_present"] == 1.0
    quiet = build_features([], "numeric", NS_PER_HOUR)
    assert list(quiet[3:]) == [0.0, 0.0, 0.0, 0.0]


def test_hour_encoding_is_on_the_unit_circle():
    for hour in (0, 6, 13, 23):
        features = build_features([], "none", hour * NS_PER_HOUR)
        assert features[0] == 1.0
        assert features[1] ** 2 + features[2] ** 2 == pytest.approx(1.0, rel=1e-12)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def _linear_samples(slope=50.0, intercept=100.0):
    records = [
        _record(2, 5, "GPU blitz"),  # effort 4.0
        _record(4, 8, "compile pass"),  # effort 2.0
    ]
    times = [h * NS_PER_HOUR for h in range(24)]
    observed = []
    for t in times:
        effort = build_features(records, "effort", t)[-1]
        observed.append(intercept + slope * effort)
    return records, times, observed


def test_fit_recovers_a_noiseless_linear_signal():
    records, times, observed = _linear_samples()
    predictor = train_predictor(records, times, observed, "effort")
    assert predictor.coefficients == pytest.approx((100.0, 0.0, 0.0, 50.0), abs=1e-6)
    assert predictor.predict(records, 3 * NS_PER_HOUR) == pytest.approx(300.0, abs=1e-6)


def test_constant_load_fits_a_flat_model():
    records, times, _ = _linear_samples()
    predictor = train_predictor(records, times, [250.0] * len(times), "effort")
    assert predictor.coefficients == pytest.approx((250.0, 0.0, 0.0, 0.0), abs=1e-6)


def test_rank_deficient_design_raises_without_ridge():
    # no record ever carries numeric fields, so those columns are all zero
    records, times, observed = _linear_samples()
    with pytest.raises(ConfigurationError, match="rank"):
        train_predictor(records, times, observed, "numeric")


def test_ridge_fallback_still_predicts():
    records, times, _ = _linear_samples()
    predictor = train_predictor(records, times, [250.0] * len(times), "numeric", allow_ridge=True)
    prediction = predictor.predict(records, 3 * NS_PER_HOUR)
    assert prediction == pytest.approx(250.0, rel=1e-4)


def test_repeated_sample_times_are_rank_deficient():
    times = [NS_PER_HOUR] * 8
    with pytest.raises(ConfigurationError):
        train_predictor([], times, [100.0] * 8, "none")


def test_fewer_samples_than_features_is_rejected():
    with pytest.raises(ValueError):
        train_predictor([], [0, NS_PER_HOUR], [1.0, 2.0], "none")
    with pytest.raises(ValueError):
        train_predictor([], [0, NS_PER_HOUR], [1.0], "none")


def test_fit_least_squares_validates_shapes():
    with pytest.raises(ValueError):
        fit_least_squares(np.ones(3), np.ones(3))
    with pytest.raises(ValueError):
        fit_least_squares(np.ones((3, 2)), np.ones((3, 1)))


def test_training_never_uses_future_announcements():
    """A record that is active during the samples but only recorded after
    them cannot influence the fit; activity alone is not knowledge."""
    records, times, observed = _linear_samples()
    times, observed = times[:12], observed[:12]
    late = _record(10, 14, "GPU GPU GPU surprise", recorded_h=12.0)
    with_late = train_predictor(list(records) + [late], times, observed, "effort")
    without = train_predictor(records, times, observed, "effort")
    assert with_late.coefficients == without.coefficients


# ---------------------------------------------------------------------------
# RMSE and family comparison
# ---------------------------------------------------------------------------


def test_rmse_worked_examples():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([2.0, 4.0], [1.0, 3.0]) == 1.0
    assert rmse([0.0, 5.0], [5.0, 0.0]) == 5.0


def test_rmse_validates_input():
    with pytest.raises(ValueError):
        rmse([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        rmse([], [])


def _job_driven_samples(seed=11, day_count=10, noise=0.0, base_load=400.0):
    jobs = generate_job_events(seed, day_count)
    records = context_records_for_jobs(jobs)
    config = SyntheticScenarioConfig(
        seed=seed, day_count=day_count, base_load=base_load,
        job_events=jobs, load_noise_amplitude=noise,
    )
    times = [k * NS_PER_HOUR // 2 for k in range(1, day_count * 48)]
    observed = [load_power_at(config, t) for t in times]
    return records, times, observed


def test_effort_family_beats_the_context_free_baseline():
    records, times, observed = _job_driven_samples(noise=0.05)
    report = evaluate_families(records, times, observed)
    assert set(report) == {"none", "numeric", "effort", "combined"}
    assert report["effort"] < report["none"]
    assert report["combined"] < report["none"]


def test_families_tie_when_context_carries_no_signal():
    # flat 300 W signal: every family should fit it essentially perfectly
    # (ridge shrinkage leaves sub-0.1 W residue on rank-deficient families)
    records, times, _ = _job_driven_samples()
    flat = [300.0] * len(times)
    report = evaluate_families(records, times, flat)
    assert max(report.values()) <= 0.1


def test_evaluate_families_validation():
    records, times, observed = _job_driven_samples(day_count=2)
    with pytest.raises(ValueError):
        evaluate_families(records, times, observed, families=("effort", "psychic"))
    with pytest.raises(ValueError):
        evaluate_families(records, times, observed, train_fraction=0.0)
    with pytest.raises(ValueError):
        evaluate_families(records, times, observed, train_fraction=1.0)
    with pytest.raises(ValueError):
        evaluate_families(records, times[:6], observed[:6], train_fraction=0.5)


def test_watts_per_effort_recovered_within_two_percent():
    """With 5% load noise the fitted effort slope lands within 2% of the
    250 W per effort unit the generator actually used."""
    records, times, observed = _job_driven_samples(noise=0.05)
    predictor = train_predictor(records, times, observed, "effort")
    slope = predictor.coefficients[3]
    assert abs(slope - 250.0) <= 5.0


# ---------------------------------------------------------------------------
# Predictor serialization
# ---------------------------------------------------------------------------


def test_predictor_json_round_trip():
    predictor = Predictor("combined", (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0))
    clone = Predictor.from_json(predictor.to_json())
    assert clone == predictor
    payload = json.loads(predictor.to_json())
    assert payload["schema_version"] == 1


def test_predictor_json_rejects_garbage():
    with pytest.raises(ConfigurationError):
        Predictor.from_json("{not json")
    with pytest.raises(ValueError):
        Predictor.from_json(json.dumps({"schema_version": 2, "mode": "none", "coefficients": [1, 0, 0]}))
    with pytest.raises(ValueError):
        Predictor.from_json(json.dumps([1, 2, 3]))


def test_predictor_coefficient_count_is_checked():
    with pytest.raises(ValueError):
        Predictor("none", (1.0, 2.0))
    with pytest.raises(ValueError):
        Predictor("effort", (1.0, 2.0, 3.0))


# ---------------------------------------------------------------------------
# Remote effort estimation
# ---------------------------------------------------------------------------


class _EstimatorHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        self.server.last_body = self.rfile.read(length)
        if self.path == "/boom":
            self.send_response(500)
            self.end_headers()
            return
        bodies = {
            "/ok": b'{"effort": 2.5}',
            "/not-json": b"effort: lots",
            "/missing-key": b'{"score": 2.5}',
            "/negative": b'{"effort": -1.0}',
            "/stringy": b'{"effort": "big"}',
        }
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(bodies[self.path])

    def log_message(self, *args):
        pass


@pytest.fixture(scope="module")
def estimator_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _EstimatorHandler)
    server.last_body = b""
    server.url = f"http://127.0.0.1:{server.server_port}"
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    thread.join()
    server.server_close()


def test_remote_estimator_happy_path(estimator_server):
    score = estimate_effort_remote("48h GPU sweep", f"{estimator_server.url}/ok", timeout_s=5.0)
    assert score == 2.5


def test_remote_estimator_sends_the_text_as_json(estimator_server):
    estimate_effort_remote("big compile", f"{estimator_server.url}/ok", timeout_s=5.0)
    assert json.loads(estimator_server.last_body) == {"text": "big compile"}


def test_remote_estimator_rejects_bad_responses(estimator_server):
    with pytest.raises(RemoteEstimatorError, match="non-JSON"):
        estimate_effort_remote("x", f"{estimator_server.url}/not-json", timeout_s=5.0)
    with pytest.raises(RemoteEstimatorError, match="effort"):
        estimate_effort_remote("x", f"{estimator_server.url}/missing-key", timeout_s=5.0)
    with pytest.raises(RemoteEstimatorError, match="negative"):
        estimate_effort_remote("x", f"{estimator_server.url}/negative", timeout_s=5.0)
    with pytest.raises(RemoteEstimatorError, match="non-numeric"):
        estimate_effort_remote("x", f"{estimator_server.url}/stringy", timeout_s=5.0)
    with pytest.raises(RemoteEstimatorError, match="failed"):
        estimate_effort_remote("x", f"{estimator_server.url}/boom", timeout_s=5.0)


def test_remote_estimator_unreachable_endpoint():
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    with pytest.raises(RemoteEstimatorError, match="failed"):
        estimate_effort_remote("x", f"http://127.0.0.1:{port}/ok", timeout_s=0.5)
