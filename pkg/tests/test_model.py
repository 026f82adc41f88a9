import copy
import json

import numpy as np
import pytest

from gaasim import casestudy
from gaasim.model import (
    AbstractInputPolicy,
    AbstractLinearSystem,
    Box,
    ConcreteLinearSystem,
    DimensionMismatch,
    DomainGap,
    FeedbackRegion,
    InvariantViolation,
    OpenLoopSegment,
    OperatingEnvelope,
    SchemaError,
    emit_config,
    parse_config,
    validate_pair,
)

from conftest import point_box


class TestParseConfig:
    def test_study_config_dimensions(self):
        sc = parse_config(casestudy.switched_config())
        assert (sc.concrete.n, sc.concrete.m, sc.concrete.p) == (2, 1, 1)
        assert (sc.abstract.n_r, sc.abstract.m_r) == (1, 1)
        assert np.allclose(sc.concrete.A, [[0.0, 1.0], [0.0, 0.0]])
        assert np.allclose(sc.abstract.B, [[1.0]])
        assert sc.epsilon == 0.5 and sc.a1 == 0.5

    def test_accepts_json_text(self):
        sc = parse_config(json.dumps(casestudy.ramp_config()))
        assert sc.policy.kind == "open_loop"

    def test_wrong_b_row_count(self):
        cfg = casestudy.switched_config()
        cfg["concrete"]["B"] = [[0.0]]
        with pytest.raises(DimensionMismatch, match="concrete.B"):
            parse_config(cfg)

    def test_empty_segments_rejected(self):
        cfg = casestudy.ramp_config()
        cfg["policy"]["segments"] = []
        with pytest.raises(InvariantViolation):
            parse_config(cfg)

    def test_coverage_gap_rejected(self):
        cfg = casestudy.ramp_config(horizon=100.0)
        cfg["policy"]["segments"] = [cfg["policy"]["segments"][0]]  # [0, 50] only
        with pytest.raises(InvariantViolation, match="cover"):
            parse_config(cfg)

    def test_unknown_keys_rejected(self):
        cfg = casestudy.switched_config()
        cfg["extra"] = 1
        with pytest.raises(SchemaError, match="extra"):
            parse_config(cfg)
        cfg = casestudy.switched_config()
        cfg["scenario"]["mystery"] = 2
        with pytest.raises(SchemaError, match="mystery"):
            parse_config(cfg)

    def test_missing_required_key_names_path(self):
        cfg = casestudy.switched_config()
        del cfg["scenario"]["K"]
        with pytest.raises(SchemaError, match=r"scenario\.K"):
            parse_config(cfg)

    def test_defaults_applied(self):
        cfg = casestudy.switched_config()
        del cfg["scenario"]["epsilon"]
        del cfg["scenario"]["step"]
        sc = parse_config(cfg)
        assert sc.epsilon == 0.5
        assert sc.step == 1e-3

    def test_malformed_json(self):
        with pytest.raises(SchemaError, match="malformed"):
            parse_config("{not json")

    def test_non_numeric_entry(self):
        cfg = casestudy.switched_config()
        cfg["scenario"]["a1"] = "fast"
        with pytest.raises(SchemaError, match=r"scenario\.a1"):
            parse_config(cfg)

    def test_round_trip(self):
        for cfg in (casestudy.switched_config(), casestudy.ramp_config()):
            first = emit_config(parse_config(cfg))
            second = emit_config(parse_config(first))
            assert first == second

    def test_optional_x0_and_m(self):
        cfg = casestudy.switched_config()
        del cfg["scenario"]["x0"]
        del cfg["scenario"]["M"]
        sc = parse_config(cfg)
        assert sc.x0 is None and sc.M is None


class TestValidatePair:
    def test_study_pair_passes(self, sys5):
        report = validate_pair(*sys5)
        assert report.all_ok
        assert set(report.checks) == {
            "state_dim_reduced",
            "input_dim_reduced",
            "output_dim_equal",
        }

    def test_oversized_abstract_state(self, sys5):
        concrete, _ = sys5
        abstract = AbstractLinearSystem(
            A=np.zeros((3, 3)),
            B=np.zeros((3, 1)),
            C=np.ones((1, 3)),
            initial_state_set=point_box([0.0, 0.0, 0.0]),
        )
        report = validate_pair(concrete, abstract)
        assert not report.checks["state_dim_reduced"]

    def test_output_dim_mismatch(self, sys5):
        concrete, _ = sys5
        abstract = AbstractLinearSystem(
            A=[[0.0]],
            B=[[1.0]],
            C=[[1.0], [0.0]],
            initial_state_set=point_box([0.0]),
        )
        report = validate_pair(concrete, abstract)
        assert not report.checks["output_dim_equal"]


class TestTypes:
    def test_box_invariants(self):
        with pytest.raises(InvariantViolation):
            Box([1.0], [0.0])
        b = Box([0.0, 1.0], [2.0, 1.0])
        assert b.contains([1.0, 1.0])
        assert not b.contains([3.0, 1.0])
        assert np.allclose(b.clamp([5.0, 0.0]), [2.0, 1.0])
        assert b.corners().shape == (2, 2)  # degenerate second axis deduplicated

    def test_envelope_rejects_negative(self):
        with pytest.raises(InvariantViolation):
            OperatingEnvelope(xhat_max=-1.0, uhat_max=0.0, uhatdot_max=0.0)

    def test_positive_input_ball(self):
        with pytest.raises(InvariantViolation):
            ConcreteLinearSystem(
                A=[[0.0]],
                B=[[1.0]],
                C=[[1.0]],
                input_ball_radius=0.0,
                initial_state_set=point_box([0.0]),
            )

    def test_segment_degree_cap(self):
        with pytest.raises(InvariantViolation):
            OpenLoopSegment(t_start=0.0, t_end=1.0, coeffs=[[1.0, 1.0, 1.0, 1.0, 1.0]])

    def test_region_overlap_rejected(self):
        with pytest.raises(InvariantViolation, match="disjoint"):
            AbstractInputPolicy(
                kind="switched_feedback",
                regions=(
                    FeedbackRegion(box=Box([0.0], [2.0]), gain=[[1.0]]),
                    FeedbackRegion(box=Box([1.0], [3.0]), gain=[[2.0]]),
                ),
            )

    def test_region_gap_rejected_1d(self):
        with pytest.raises(InvariantViolation, match="gap"):
            AbstractInputPolicy(
                kind="switched_feedback",
                regions=(
                    FeedbackRegion(box=Box([2.0], [3.0]), gain=[[1.0]]),
                    FeedbackRegion(box=Box([0.0], [1.0]), gain=[[2.0]]),
                ),
            )

    def test_region_lookup_first_match(self):
        sc = parse_config(casestudy.switched_config())
        # shared boundary 30 belongs to the earlier-declared (upper) region
        assert sc.policy.region_index([30.0]) == 0
        assert sc.policy.region_index([29.999]) == 1
        with pytest.raises(DomainGap):
            sc.policy.region_index([100.0])


class TestPolicyEvaluationGrid:
    def test_open_loop_smooth_within_segments(self):
        sc = parse_config(casestudy.ramp_config(horizon=200.0))
        policy = sc.policy
        breaks = set(policy.breakpoints())
        ts = np.linspace(0.0, 200.0, 10_000)
        lip = 0.03  # |duhat/dt| <= 0.02 on the ramp, 0 afterwards
        values = []
        for t in ts:
            seg = policy.segment_at(t)
            values.append(seg.value(t))
        values = np.array(values)
        for i in range(len(ts) - 1):
            spans_break = any(ts[i] < b <= ts[i + 1] for b in breaks)
            if not spans_break:
                dv = np.linalg.norm(values[i + 1] - values[i])
                assert dv <= lip * (ts[i + 1] - ts[i]) + 1e-12

    def test_switched_jumps_only_at_boundaries(self):
        sc = parse_config(casestudy.switched_config())
        policy = sc.policy
        boundaries = {30.0, 20.0, 10.0}
        xs = np.linspace(0.0, 40.1, 10_000)
        gains = np.array([policy.regions[policy.region_index([x])].gain[0, 0] for x in xs])
        values = -gains * xs
        max_gain = max(r.gain[0, 0] for r in policy.regions)
        for i in range(len(xs) - 1):
            spans = any(xs[i] < b <= xs[i + 1] for b in boundaries)
            if not spans:
                dv = abs(values[i + 1] - values[i])
                assert dv <= max_gain * (xs[i + 1] - xs[i]) + 1e-12


def test_emit_equals_source_dict():
    cfg = casestudy.switched_config()
    emitted = emit_config(parse_config(copy.deepcopy(cfg)))
    assert emitted == cfg


def test_parser_mutation_fuzz_raises_only_config_errors():
    # delete keys, retype values, and scramble leaves: the parser must
    # either accept the document or raise from the ConfigError family,
    # never a bare KeyError/TypeError/IndexError
    from gaasim.model import ConfigError

    rng = np.random.default_rng(2024)
    poison = [None, True, "text", 3, [], {}, [[]], [[None]], float("nan")]

    def all_paths(node, prefix=()):
        if isinstance(node, dict):
            for key, value in node.items():
                yield prefix + (key,)
                yield from all_paths(value, prefix + (key,))
        elif isinstance(node, list):
            for i, value in enumerate(node):
                yield from all_paths(value, prefix + (i,))

    def mutate(cfg, path, value, delete):
        node = cfg
        for step in path[:-1]:
            node = node[step]
        if delete and isinstance(node, dict):
            del node[path[-1]]
        else:
            node[path[-1]] = value

    base = casestudy.switched_config()
    paths = list(all_paths(base))
    for _ in range(300):
        cfg = copy.deepcopy(base)
        path = paths[int(rng.integers(len(paths)))]
        delete = bool(rng.integers(2))
        value = poison[int(rng.integers(len(poison)))]
        try:
            mutate(cfg, path, value, delete)
            parse_config(cfg)
        except ConfigError:
            pass  # expected failure family
