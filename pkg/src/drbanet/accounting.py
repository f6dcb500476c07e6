"""Symbolic parameter and MAC counting over a NetworkPlan.

Conventions: conv parameters are (C_in / groups) * C_out * kh * kw plus bias
terms; each norm carries 4*C values of which 2*C (gamma, beta) are learnable.
Conv MACs are weight parameters (bias excluded) times output area. Pure data
movement (pooling, upsampling, elementwise adds) costs 0 MACs and is tallied
separately as memory ops. FLOPs are reported as 2 * MACs; the convention is printed with
every report since published cost figures rarely state theirs.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError
from .network import BlockDef, NetworkPlan, build_plan

FLOP_NOTE = "FLOPs = 2 x MACs (one multiply-accumulate = 2 FLOPs)"

PARAM_CLAIM = 2_300_000
FLOP_CLAIM = 11_900_000_000
PARAM_TOLERANCE = 0.15
FLOP_TOLERANCE = 0.30


@dataclass(frozen=True)
class CostRow:
    label: str
    stream: str
    kind: str
    output: str  # human-readable output dims
    params_total: int
    params_learnable: int
    macs: int
    mem_ops: int


@dataclass(frozen=True)
class CostReport:
    rows: tuple[CostRow, ...]
    resolution: tuple[int, int] | None  # (h, w); None for a params-only report
    params_total: int
    params_learnable: int
    macs_total: int
    mem_ops_total: int
    note: str = FLOP_NOTE

    @property
    def flops_total(self) -> int:
        return 2 * self.macs_total

    def resolution_key(self) -> str:
        if self.resolution is None:
            return ""
        h, w = self.resolution
        return f"{w}x{h}"

    def table(self) -> str:
        headers = ("layer", "stream", "kind", "output", "params", "macs", "mem ops")
        cells = [headers]
        for r in self.rows:
            cells.append(
                (r.label, r.stream, r.kind, r.output, f"{r.params_total:,}",
                 f"{r.macs:,}", f"{r.mem_ops:,}")
            )
        cells.append(
            ("total", "", "", "", f"{self.params_total:,}", f"{self.macs_total:,}",
             f"{self.mem_ops_total:,}")
        )
        widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
        lines = []
        for row in cells:
            lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        lines.append("")
        if self.resolution is not None:
            lines.append(f"input resolution: {self.resolution_key()} (WxH)")
            lines.append(
                f"totals: params {self.params_total:,} "
                f"({self.params_learnable:,} learnable), MACs {self.macs_total:,} "
                f"({self.macs_total / 1e9:.3f} G), FLOPs {self.flops_total:,} "
                f"({self.flops_total / 1e9:.3f} G)"
            )
        else:
            lines.append(
                f"totals: params {self.params_total:,} "
                f"({self.params_learnable:,} learnable)"
            )
        lines.append(self.note)
        return "\n".join(lines)

    def machine_lines(self) -> list[str]:
        lines = [
            f"params.total={self.params_total}",
            f"params.learnable={self.params_learnable}",
        ]
        if self.resolution is not None:
            key = self.resolution_key()
            lines.append(f"macs.total@{key}={self.macs_total}")
            lines.append(f"flops.total@{key}={self.flops_total}")
            lines.append(f"memops.total@{key}={self.mem_ops_total}")
        for r in self.rows:
            prefix = f"layer.{r.label}.{r.stream}"
            lines.append(f"{prefix}.params={r.params_total}")
            if self.resolution is not None:
                lines.append(f"{prefix}.macs@{self.resolution_key()}={r.macs}")
        return lines


def _block_params(block: BlockDef) -> tuple[int, int]:
    total = 0
    learnable = 0
    for cd in block.convs:
        weights = cd.spec.weight_param_count
        bias = cd.spec.out_channels if cd.spec.has_bias else 0
        norm_total = 4 * cd.spec.out_channels if cd.has_norm else 0
        norm_learnable = 2 * cd.spec.out_channels if cd.has_norm else 0
        total += weights + bias + norm_total
        learnable += weights + bias + norm_learnable
    return total, learnable


def _block_macs(block: BlockDef) -> int:
    return sum(
        cd.spec.weight_param_count * cd.out_hw[0] * cd.out_hw[1] for cd in block.convs
    )


def _block_mem_ops(block: BlockDef, plan: NetworkPlan) -> int:
    """Zero-MAC data movement (pools, upsamples, elementwise adds)."""
    full_h, full_w = plan.resolution
    if block.kind == "eibm":
        c, h, w = block.outputs[0][1]
        return c * h * w
    if block.kind == "bfm":
        low_c, low_h, low_w = block.output_for("lrb")
        high_c, high_h, high_w = block.output_for("hrb")
        # upsample low->high, add on the high stream, add on the low stream
        return 2 * high_c * high_h * high_w + low_c * low_h * low_w
    if block.kind == "elppm":
        nh, nw = block.native_hw
        cin = block.convs[0].spec.in_channels
        c4 = block.convs[0].spec.out_channels
        out_c, out_h, out_w = block.outputs[0][1]
        pools = sum(
            cin * cd.out_hw[0] * cd.out_hw[1] for cd in block.convs[1:5]
        )  # three windowed pools plus the global pool, all at full width
        upsamples = 4 * c4 * nh * nw  # paths 1..4 brought back to native size
        adds = 5 * c4 * nh * nw  # four hierarchical adds plus the shortcut add
        enlarge = out_c * out_h * out_w  # final 8x enlargement for fusion
        return pools + upsamples + adds + enlarge
    if block.kind == "fusion":
        c, h, w = block.outputs[0][1]
        return c * h * w  # add of the HRB tail and the enlarged context
    if block.kind == "boundary_head":
        return full_h * full_w  # boundary logits upsampled to input size
    if block.kind == "seg_head":
        c, _, _ = block.outputs[0][1]
        return c * full_h * full_w  # logits upsampled to input size
    return 0  # stem


def _report(plan: NetworkPlan, with_macs: bool) -> CostReport:
    rows = []
    for b in plan.blocks:
        params_total, params_learnable = _block_params(b)
        macs = _block_macs(b) if with_macs else 0
        mem = _block_mem_ops(b, plan) if with_macs else 0
        output = ", ".join(f"{s}:{c}x{h}x{w}" for s, (c, h, w) in b.outputs)
        rows.append(
            CostRow(b.label, b.stream, b.kind, output, params_total, params_learnable, macs, mem)
        )
    return CostReport(
        tuple(rows),
        plan.resolution if with_macs else None,
        sum(r.params_total for r in rows),
        sum(r.params_learnable for r in rows),
        sum(r.macs for r in rows),
        sum(r.mem_ops for r in rows),
    )


def count_params(plan: NetworkPlan) -> CostReport:
    return _report(plan, with_macs=False)


def count_macs(plan: NetworkPlan, input_resolution: tuple[int, int] | None = None) -> CostReport:
    """Full cost report. If input_resolution (h, w) differs from the plan's,
    the plan is rebuilt at that resolution; parameters are unaffected."""
    if input_resolution is not None and tuple(input_resolution) != plan.resolution:
        plan = build_plan(plan.num_classes, tuple(input_resolution), plan.head_hidden)
    return _report(plan, with_macs=True)


@dataclass(frozen=True)
class ClaimVerdict:
    params_total: int
    params_delta: float  # fraction relative to the claim
    params_ok: bool
    flops_by_resolution: tuple[tuple[str, int, float, bool], ...]  # key, flops, delta, ok
    passed: bool

    def lines(self) -> list[str]:
        out = [
            f"params: {self.params_total:,} vs claim {PARAM_CLAIM:,} "
            f"({self.params_delta:+.1%}, tolerance ±{PARAM_TOLERANCE:.0%}) "
            f"{'PASS' if self.params_ok else 'FAIL'}"
        ]
        nearest = min(self.flops_by_resolution, key=lambda r: abs(r[2]))
        for key, flops, delta, ok in self.flops_by_resolution:
            marker = " (nearest to claim)" if key == nearest[0] else ""
            out.append(
                f"flops@{key}: {flops:,} ({flops / 1e9:.3f} G) vs claim "
                f"{FLOP_CLAIM / 1e9:.1f} G ({delta:+.1%}, tolerance "
                f"±{FLOP_TOLERANCE:.0%}) {'PASS' if ok else 'FAIL'}{marker}"
            )
        out.append(FLOP_NOTE)
        out.append(f"claims: {'PASS' if self.passed else 'FAIL'}")
        return out

    def machine_lines(self) -> list[str]:
        out = [
            f"claim.params={'PASS' if self.params_ok else 'FAIL'}",
            f"claim.params.delta={self.params_delta:+.4f}",
        ]
        for key, _, delta, ok in self.flops_by_resolution:
            out.append(f"claim.flops@{key}={'PASS' if ok else 'FAIL'}")
            out.append(f"claim.flops.delta@{key}={delta:+.4f}")
        out.append(f"claim.verdict={'PASS' if self.passed else 'FAIL'}")
        return out


def verify_claims(reports) -> ClaimVerdict:
    """PASS iff the parameter total is within ±15% of the published 2.3M and
    the FLOP total at one or more of the given resolutions is within ±30% of
    the published 11.9 G."""
    reports = list(reports)
    if not reports:
        raise ConfigurationError("verify_claims needs at least one cost report")
    params = {r.params_total for r in reports}
    if len(params) != 1:
        raise ConfigurationError(f"reports disagree on parameter totals: {sorted(params)}")
    params_total = reports[0].params_total
    params_delta = (params_total - PARAM_CLAIM) / PARAM_CLAIM
    params_ok = abs(params_delta) <= PARAM_TOLERANCE

    flops_rows = []
    any_flops_ok = False
    for r in reports:
        if r.resolution is None:
            raise ConfigurationError("verify_claims needs MAC reports, not params-only")
        delta = (r.flops_total - FLOP_CLAIM) / FLOP_CLAIM
        ok = abs(delta) <= FLOP_TOLERANCE
        any_flops_ok = any_flops_ok or ok
        flops_rows.append((r.resolution_key(), r.flops_total, delta, ok))
    return ClaimVerdict(
        params_total,
        params_delta,
        params_ok,
        tuple(flops_rows),
        params_ok and any_flops_ok,
    )
