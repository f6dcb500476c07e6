"""Parameter and MAC accounting: hand-counted block costs and scaling laws
across input resolutions, plus the published-claim verdict logic."""

import numpy as np
import pytest

from drbanet import (
    ConfigurationError,
    CostReport,
    FLOP_CLAIM,
    PARAM_CLAIM,
    build_plan,
    count_macs,
    count_params,
    init_weights,
    verify_claims,
)


@pytest.fixture(scope="module")
def plan1024():
    return build_plan(19, (1024, 1024))


@pytest.fixture(scope="module")
def plan512():
    return build_plan(19, (512, 512))


def _conv_weight_total(plan, prefix):
    return sum(
        int(np.prod(p.shape))
        for p in plan.manifest()
        if p.name.startswith(prefix) and p.name.endswith(".weight")
    )


def test_stem_costs_by_hand(plan1024):
    report = count_macs(plan1024)
    row = next(r for r in report.rows if r.kind == "stem")
    # 3x3 conv, 3 -> 32 channels: 864 weights plus a 32-channel norm
    # (128 stored values, 64 learnable).
    assert row.params_total == 864 + 128
    assert row.params_learnable == 864 + 64
    # The stem writes a 512x512 map at 1024x1024 input.
    assert row.macs == 864 * 512 * 512


def test_inverted_bottleneck_weight_identity(plan1024):
    # An unstrided block at width C spends 4*C^2 + 36*C conv weights:
    # two pointwise convs of 2*C^2 each and two 3x3 depthwise at 2C channels.
    assert _conv_weight_total(plan1024, "hrb.layer7.") == 4 * 64 * 64 + 36 * 64
    # The strided 256 -> 512 block adds a projection shortcut.
    expected = 256 * 512 + 2 * 9 * 512 + 512 * 512 + 256 * 512
    assert _conv_weight_total(plan1024, "lrb.layer12.") == expected


def test_parameter_total_and_band(plan1024):
    report = count_params(plan1024)
    assert report.params_total == 2_477_319
    assert 1_950_000 <= report.params_total <= 2_650_000
    assert report.params_learnable == 2_449_927
    assert report.params_learnable < report.params_total


def test_parameters_do_not_depend_on_resolution(plan1024, plan512):
    assert count_params(plan1024).params_total == count_params(plan512).params_total
    rows_a = {(r.label, r.stream): r.params_total for r in count_params(plan1024).rows}
    rows_b = {(r.label, r.stream): r.params_total for r in count_params(plan512).rows}
    assert rows_a == rows_b


def test_accounting_agrees_with_materialised_weights(plan512):
    store = init_weights(plan512, seed=0)
    assert store.element_count() == count_params(plan512).params_total


def test_every_block_has_exactly_one_row(plan1024):
    report = count_macs(plan1024)
    assert len(report.rows) == len(plan1024.blocks)
    keys = [(r.label, r.stream) for r in report.rows]
    assert len(keys) == len(set(keys))


def test_mac_totals(plan1024):
    report = count_macs(plan1024)
    assert report.macs_total == 7_186_767_872
    assert report.flops_total == 2 * report.macs_total
    assert report.macs_total == sum(r.macs for r in report.rows)
    assert report.resolution_key() == "1024x1024"


def test_macs_scale_with_area_except_global_pooling(plan1024, plan512):
    big = {(r.label, r.stream): r.macs for r in count_macs(plan1024).rows}
    small = {(r.label, r.stream): r.macs for r in count_macs(plan512).rows}
    assert set(big) == set(small)
    for key in big:
        if key == ("13", "lrb"):
            continue
        assert big[key] == 4 * small[key], key
    # The pyramid's global branch always emits one pixel before upsampling,
    # so quartering the input area leaves a fixed remainder behind.
    assert 4 * small[("13", "lrb")] - big[("13", "lrb")] == 196_608


def test_count_macs_can_rebuild_for_another_resolution(plan512):
    direct = count_macs(build_plan(19, (1024, 2048)))
    via_rebuild = count_macs(plan512, input_resolution=(1024, 2048))
    assert direct.macs_total == via_rebuild.macs_total
    assert via_rebuild.resolution_key() == "2048x1024"


def test_claims_pass_at_the_reference_resolution(plan1024, plan512):
    wide = count_macs(plan1024, input_resolution=(1024, 2048))
    verdict = verify_claims([count_macs(plan1024), wide])
    assert verdict.params_ok
    assert verdict.params_total == 2_477_319
    assert verdict.passed
    by_key = {key: ok for key, _, _, ok in verdict.flops_by_resolution}
    assert by_key["1024x1024"] is True
    assert by_key["2048x1024"] is False
    assert any("nearest to claim" in line for line in verdict.lines())


def test_claim_verdict_fails_outside_the_band(plan1024):
    real = count_macs(plan1024)
    inflated = CostReport(
        rows=real.rows,
        resolution=real.resolution,
        params_total=3_100_000,
        params_learnable=3_000_000,
        macs_total=real.macs_total,
        mem_ops_total=real.mem_ops_total,
    )
    verdict = verify_claims([inflated])
    assert not verdict.params_ok
    assert not verdict.passed
    assert verdict.params_delta == pytest.approx((3_100_000 - PARAM_CLAIM) / PARAM_CLAIM)
    # FLOPs alone were fine, so the failure is attributable to parameters.
    assert all(ok for _, _, _, ok in verdict.flops_by_resolution)


def test_claim_input_validation(plan1024, plan512):
    with pytest.raises(ConfigurationError):
        verify_claims([])
    with pytest.raises(ConfigurationError):
        verify_claims([count_params(plan1024)])
    real = count_macs(plan1024)
    other = CostReport(
        rows=real.rows,
        resolution=real.resolution,
        params_total=real.params_total + 1,
        params_learnable=real.params_learnable,
        macs_total=real.macs_total,
        mem_ops_total=real.mem_ops_total,
    )
    with pytest.raises(ConfigurationError):
        verify_claims([real, other])


def test_machine_lines_cover_totals_and_rows(plan1024):
    report = count_macs(plan1024)
    lines = report.machine_lines()
    assert "params.total=2477319" in lines
    assert "macs.total@1024x1024=7186767872" in lines
    assert "flops.total@1024x1024=14373535744" in lines
    assert any(line.startswith("layer.1.hrb.params=") for line in lines)
    assert any(line.startswith("layer.13.lrb.macs@1024x1024=") for line in lines)
    verdict = verify_claims([report])
    assert "claim.verdict=PASS" in verdict.machine_lines()


def test_flop_claim_constants_are_sane():
    assert PARAM_CLAIM == 2_300_000
    assert FLOP_CLAIM == 11_900_000_000
