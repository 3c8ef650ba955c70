"""Monte Carlo experiments: AWGN error rates, achievable-rate curves,
quantization sweeps, and the decoding-complexity model.

Reproducibility contract: every experiment derives per-chunk RNG streams
from (master seed, grid index, chunk index) and reduces results in fixed
chunk order, so outputs are bit-identical regardless of thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .algebra import CrtMap, centered, factorize
from .errors import InvariantViolation
from .lattice import MultilevelLattice
from .nested import ChannelState, NestedLatticeCode
from .decoders import DECODERS, NOISE_FLOOR

WILSON_Z = 1.959963984540054  # two-sided 95%


def awgn(x, noise_var: float, seed) -> np.ndarray:
    """y = x + z with z i.i.d. N(0, noise_var); deterministic per seed."""
    arr = np.asarray(x, dtype=np.float64)
    if noise_var < 0:
        raise ValueError("noise variance must be nonnegative")
    if noise_var == 0:
        return arr.copy()
    rng = np.random.default_rng(seed)
    return arr + rng.normal(0.0, math.sqrt(noise_var), size=arr.shape)


def wilson_interval(errors: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    phat = errors / trials
    denom = 1.0 + z**2 / trials
    center = (phat + z**2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z**2 / (4 * trials**2)) / denom
    lo = 0.0 if errors == 0 else max(center - half, 0.0)
    hi = 1.0 if errors == trials else min(center + half, 1.0)
    return lo, hi


def _run_chunks(tasks, worker, threads: int):
    """Map worker over tasks, preserving task order in the result list."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, tasks))
    return [worker(t) for t in tasks]


def _snr_to_noise_var(power: float, snr_db: float) -> float:
    if math.isinf(snr_db):
        return 0.0
    return power / 10.0 ** (snr_db / 10.0)


# -- decoder word/symbol error rates ----------------------------------------


@dataclass(frozen=True)
class ErrorRatePoint:
    snr_db: float
    decoder: str
    trials: int
    errors: int
    wer: float
    wer_lo: float
    wer_hi: float
    level_symbol_error: tuple[float, ...]


def error_rate_sim(
    lattice: MultilevelLattice,
    snr_db: Sequence[float],
    trials: int,
    seed: int = 0,
    decoders: Sequence[str] = ("msd", "smd", "pmd"),
    wraps: int = 4,
    threads: int = 1,
    chunk: int = 256,
    check_monotone: bool = True,
) -> list[ErrorRatePoint]:
    """Word-error and per-level symbol-error rates over an SNR grid.

    Transmit points are drawn uniformly from the coset representatives
    (hypercube shaping), mapped to the centered view, and perturbed by AWGN
    with variance set from the constellation's average power.  A word error
    is any mismatch of the reconstructed lattice point, integer part
    included.  With check_monotone, a WER increase beyond twice the combined
    standard errors between adjacent SNR points raises InvariantViolation.
    """
    for name in decoders:
        if name not in DECODERS:
            raise ValueError(f"unknown decoder {name!r}; choose from {sorted(DECODERS)}")
    if trials < 1:
        raise ValueError("need at least one trial")
    grid = list(snr_db)
    if grid != sorted(grid):
        raise ValueError("snr_db grid must be sorted")
    reps = lattice.coset_representatives()
    creps = centered(reps, lattice.q)
    power = float((creps.astype(np.float64) ** 2).sum() / creps.size)
    n = lattice.n

    points: list[ErrorRatePoint] = []
    for si, snr in enumerate(grid):
        noise_var = _snr_to_noise_var(power, snr)
        chunks = [(ci, min(chunk, trials - ci * chunk)) for ci in range((trials + chunk - 1) // chunk)]

        def run(task, _snr_index=si, _noise_var=noise_var):
            ci, size = task
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_snr_index, ci)))
            sel = rng.integers(0, len(creps), size=size)
            noise = rng.normal(0.0, math.sqrt(_noise_var), size=(size, n)) if _noise_var else np.zeros((size, n))
            word_err = {name: 0 for name in decoders}
            sym_err = {name: np.zeros(lattice.num_levels) for name in decoders}
            for row in range(size):
                x = creps[sel[row]]
                truth = lattice.cmap.inverse(np.mod(x, lattice.q))
                y = x + noise[row]
                for name in decoders:
                    result = DECODERS[name](lattice, y, _noise_var, wraps=wraps)
                    word_err[name] += int(not np.array_equal(result.point, x))
                    for lvl, (dec, ref) in enumerate(zip(result.codewords, truth)):
                        sym_err[name][lvl] += np.count_nonzero(dec != ref) / n
            return word_err, sym_err

        parts = _run_chunks(chunks, run, threads)
        for name in decoders:
            errors = sum(p[0][name] for p in parts)
            level_err = sum((p[1][name] for p in parts), np.zeros(lattice.num_levels))
            lo, hi = wilson_interval(errors, trials)
            points.append(
                ErrorRatePoint(
                    snr_db=float(snr),
                    decoder=name,
                    trials=trials,
                    errors=errors,
                    wer=errors / trials,
                    wer_lo=lo,
                    wer_hi=hi,
                    level_symbol_error=tuple(float(v) / trials for v in level_err),
                )
            )

    if check_monotone:
        _check_wer_monotone(points, decoders)
    return points


def _check_wer_monotone(points: list[ErrorRatePoint], decoders: Sequence[str]):
    for name in decoders:
        rows = [p for p in points if p.decoder == name]
        for prev, cur in zip(rows, rows[1:]):
            se_prev = math.sqrt(max(prev.wer * (1 - prev.wer), 1e-12) / prev.trials)
            se_cur = math.sqrt(max(cur.wer * (1 - cur.wer), 1e-12) / cur.trials)
            slack = 2.0 * math.hypot(se_prev, se_cur)
            if cur.wer > prev.wer + slack:
                raise InvariantViolation(
                    f"{name} WER rose from {prev.wer:.4g} (at {prev.snr_db} dB) "
                    f"to {cur.wer:.4g} (at {cur.snr_db} dB) beyond tolerance"
                )


# -- achievable-rate curves ---------------------------------------------------


@dataclass(frozen=True)
class RateCurvePoint:
    snr_db: float
    r_msd: float
    r_msd_se: float
    r_smd: float
    r_smd_se: float
    r_pmd: float
    r_pmd_se: float
    r_msd_chain: float = 0.0
    r_msd_chain_se: float = 0.0
    r_smd_levels: tuple[float, ...] = ()
    r_pmd_levels: tuple[float, ...] = ()


def _wrapped_loglik(diff: np.ndarray, variance: float, period: float, wraps: int) -> np.ndarray:
    shifts = np.arange(-wraps, wraps + 1) * period
    logs = -((diff[..., None] + shifts) ** 2) / (2.0 * variance)
    return logsumexp(logs, axis=-1) - 0.5 * math.log(2.0 * math.pi * variance)


def rate_curve(
    cmap: CrtMap,
    snr_db: Sequence[float],
    samples: int,
    seed: int = 0,
    wraps: int = 6,
    threads: int = 1,
    chunk: int = 65536,
) -> list[RateCurvePoint]:
    """Monte Carlo achievable rates of the three decoders per SNR point.

    Uses the scalar constellation of all q map outputs (hypercube shaping),
    centered and power-normalized; SNR = power / noise variance.  Densities
    are exact finite mixtures; only the outer expectation is sampled.  The
    multistage rate is also re-estimated as a sum of per-level conditional
    terms (r_msd_chain) for consistency checks.
    """
    q = cmap.q
    moduli = cmap.tower.moduli
    levels = len(moduli)
    symbols = np.arange(q, dtype=np.int64)
    x_cent = centered(symbols, q).astype(np.float64)
    power = float((x_cent**2).mean())
    residues = np.stack(cmap.inverse(symbols))  # (L, q)

    # Per-level serial-decoder constants: divisor D_l and unit d_l.
    divisors, units = [], []
    div = 1
    for l, m in enumerate(moduli):
        divisors.append(div)
        units.append((cmap.coefficients[l] * (cmap.tower.partial_products[l] // div)) % m)
        div *= m

    # Prefix class ids for the chain-rule terms: class of (c^1 .. c^l).
    prefix_ids = np.zeros((levels + 1, q), dtype=np.int64)
    stride = 1
    for l, m in enumerate(moduli):
        prefix_ids[l + 1] = prefix_ids[l] + residues[l] * stride
        stride *= m

    out = []
    for si, snr in enumerate(snr_db):
        noise_var = max(_snr_to_noise_var(power, snr), NOISE_FLOOR)
        chunks = [(ci, min(chunk, samples - ci * chunk)) for ci in range((samples + chunk - 1) // chunk)]

        def run(task, _si=si, _noise_var=noise_var):
            ci, size = task
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_si, ci)))
            sym = rng.integers(0, q, size=size)
            z = rng.normal(0.0, math.sqrt(_noise_var), size=size)
            y = x_cent[sym] + z

            # Direct I(X;Y): log p(y|x) - log p(y) with the exact q-mixture.
            log_cond = -((y - x_cent[sym]) ** 2) / (2.0 * _noise_var)
            mix = -((y[:, None] - x_cent[None, :]) ** 2) / (2.0 * _noise_var)
            log_marg = logsumexp(mix, axis=1) - math.log(q)
            msd = (log_cond - log_marg) / math.log(2.0)

            # Chain form on an independent stream (the telescoped sum over the
            # same samples would equal the direct estimate identically).
            sym_c = rng.integers(0, q, size=size)
            z_c = rng.normal(0.0, math.sqrt(_noise_var), size=size)
            y_c = x_cent[sym_c] + z_c
            mix_c = -((y_c[:, None] - x_cent[None, :]) ** 2) / (2.0 * _noise_var)
            chain = np.zeros(size)
            log_prefix_prev = logsumexp(mix_c, axis=1) - math.log(q)
            for l in range(1, levels + 1):
                ids = prefix_ids[l]
                log_prefix = np.empty(size)
                for cls in np.unique(ids[sym_c]):
                    members = np.nonzero(ids == cls)[0]
                    rows = np.nonzero(ids[sym_c] == cls)[0]
                    sub = mix_c[np.ix_(rows, members)]
                    log_prefix[rows] = logsumexp(sub, axis=1) - math.log(len(members))
                chain += (log_prefix - log_prefix_prev) / math.log(2.0)
                log_prefix_prev = log_prefix

            # Serial/parallel mod-m_s channels; level 1 is shared.
            smd_terms = np.zeros((levels, size))
            pmd_terms = np.zeros((levels, size))
            if levels == 1:
                smd = msd.copy()
                pmd = msd.copy()
                smd_terms[0] = msd
                pmd_terms[0] = msd
            else:
                for l, m in enumerate(moduli):
                    centers = np.arange(m, dtype=np.float64)
                    # parallel: full-variance wrap of the raw observation
                    y_mod = np.mod(y, m)
                    cond = _wrapped_loglik(y_mod - (sym % m), _noise_var, m, wraps)
                    marg = logsumexp(
                        _wrapped_loglik(y_mod[:, None] - centers[None, :], _noise_var, m, wraps),
                        axis=1,
                    ) - math.log(m)
                    pmd_terms[l] = (cond - marg) / math.log(2.0)
                    if l == 0:
                        smd_terms[0] = pmd_terms[0]
                    else:
                        # serial: divided observation, reduced variance
                        d = divisors[l]
                        var_l = _noise_var / d**2
                        eff = (units[l] * residues[l][sym]) % m
                        y_l = np.mod(eff + z / d, m)
                        cond_s = _wrapped_loglik(y_l - eff, var_l, m, wraps)
                        marg_s = logsumexp(
                            _wrapped_loglik(y_l[:, None] - centers[None, :], var_l, m, wraps),
                            axis=1,
                        ) - math.log(m)
                        smd_terms[l] = (cond_s - marg_s) / math.log(2.0)
                smd = smd_terms.sum(axis=0)
                pmd = pmd_terms.sum(axis=0)

            def stats(v):
                return v.sum(), (v**2).sum()

            return (
                stats(msd),
                stats(chain),
                stats(smd),
                stats(pmd),
                smd_terms.sum(axis=1),
                pmd_terms.sum(axis=1),
            )

        parts = _run_chunks(chunks, run, threads)

        def reduce(idx):
            total = sum(p[idx][0] for p in parts)
            total_sq = sum(p[idx][1] for p in parts)
            mean = total / samples
            var = max(total_sq / samples - mean**2, 0.0)
            return mean, math.sqrt(var / samples)

        msd_m, msd_se = reduce(0)
        chain_m, chain_se = reduce(1)
        smd_m, smd_se = reduce(2)
        pmd_m, pmd_se = reduce(3)
        smd_levels = sum(p[4] for p in parts) / samples
        pmd_levels = sum(p[5] for p in parts) / samples
        out.append(
            RateCurvePoint(
                snr_db=float(snr),
                r_msd=msd_m,
                r_msd_se=msd_se,
                r_smd=smd_m,
                r_smd_se=smd_se,
                r_pmd=pmd_m,
                r_pmd_se=pmd_se,
                r_msd_chain=chain_m,
                r_msd_chain_se=chain_se,
                r_smd_levels=tuple(float(v) for v in smd_levels),
                r_pmd_levels=tuple(float(v) for v in pmd_levels),
            )
        )
    return out


# -- nested-code simulation ---------------------------------------------------


@dataclass(frozen=True)
class NestedTrial:
    trial: int
    snr_db: float
    success: bool
    level_success: tuple[bool, ...]


@dataclass(frozen=True)
class NestedSummary:
    snr_db: float
    trials: int
    errors: int
    wer: float
    wer_lo: float
    wer_hi: float
    mean_power: float
    mean_effective_noise: float
    effective_noise_bound: float


def nested_error_sim(
    code: NestedLatticeCode,
    snr_db: Sequence[float],
    trials: int,
    seed: int = 0,
    wraps: int = 6,
    threads: int = 1,
    chunk: int = 256,
) -> tuple[list[NestedTrial], list[NestedSummary]]:
    """Dithered transmission of random messages through AWGN with MMSE receive.

    Per trial: draw a message and a fresh dither, send x = (t - u) mod coarse,
    receive (alpha y + u) mod coarse, decode level by level.  Logs per-trial
    and per-level successes plus measured power and effective noise.
    """
    sizes = tuple(len(g) for g in code._level_messages)
    point_table = code._point_table
    trials_log: list[NestedTrial] = []
    summaries: list[NestedSummary] = []
    n = code.n
    for si, snr in enumerate(snr_db):
        noise_var = _snr_to_noise_var(code.power, snr)
        state = ChannelState(code.power, noise_var) if noise_var else None
        chunks = [(ci, min(chunk, trials - ci * chunk)) for ci in range((trials + chunk - 1) // chunk)]

        def run(task, _si=si, _noise_var=noise_var, _state=state):
            ci, size = task
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_si, ci)))
            msg_idx = rng.integers(0, code.message_count, size=size)
            t = code.scale * point_table[msg_idx]
            u = code.coarse_lattice.mod(rng.uniform(0.0, code.gamma, size=(size, n)))
            x = code.coarse_lattice.mod(t - u)
            z = rng.normal(0.0, math.sqrt(_noise_var), size=(size, n)) if _noise_var else np.zeros((size, n))
            y = x + z
            alpha = _state.alpha if _state else 1.0
            obs = code.coarse_lattice.mod(alpha * y + u)
            decoded = code.decode_batch(obs, _noise_var, wraps=wraps)
            z_eq = code.coarse_lattice.mod(alpha * z - (1 - alpha) * x)
            return (
                msg_idx,
                decoded,
                float((x**2).sum() / (size * n)),
                float((z_eq**2).sum() / (size * n)),
            )

        parts = _run_chunks(chunks, run, threads)
        errors = 0
        power_acc = 0.0
        zeq_acc = 0.0
        t_index = 0
        for (ci, size), (truth, decoded, mean_pow, mean_zeq) in zip(chunks, parts):
            power_acc += mean_pow * size
            zeq_acc += mean_zeq * size
            for row in range(size):
                ok = decoded[row] == truth[row]
                lvl_ok = []
                a, b = int(decoded[row]), int(truth[row])
                for s in reversed(sizes):
                    a, ra = divmod(a, s)
                    b, rb = divmod(b, s)
                    lvl_ok.append(ra == rb)
                lvl_ok.reverse()
                trials_log.append(
                    NestedTrial(trial=t_index, snr_db=float(snr), success=bool(ok), level_success=tuple(lvl_ok))
                )
                errors += int(not ok)
                t_index += 1
        lo, hi = wilson_interval(errors, trials)
        summaries.append(
            NestedSummary(
                snr_db=float(snr),
                trials=trials,
                errors=errors,
                wer=errors / trials,
                wer_lo=lo,
                wer_hi=hi,
                mean_power=power_acc / trials,
                mean_effective_noise=zeq_acc / trials,
                effective_noise_bound=state.effective_noise_var if state else 0.0,
            )
        )
    return trials_log, summaries


# -- decoding-complexity model -----------------------------------------------


@dataclass(frozen=True)
class ComplexityRow:
    q: int
    single_level_cost: float
    multilevel_cost: float
    ratio: float


def complexity_estimate(q: int) -> ComplexityRow:
    """Cost model q log2 q for one code over Z_q versus the per-level sum.

    The multilevel cost charges each level its own p^e log2(p^e); the ratio
    grows with q whenever q splits into several smaller factors.
    """
    if q < 2:
        raise ValueError("q must be >= 2")
    single = q * math.log2(q)
    multi = sum((p**e) * math.log2(p**e) for p, e in factorize(q))
    return ComplexityRow(q=q, single_level_cost=single, multilevel_cost=multi, ratio=single / multi)


def complexity_table(q_values: Iterable[int]) -> list[ComplexityRow]:
    return [complexity_estimate(int(q)) for q in q_values]


# -- CSV writers (exact column contracts) --------------------------------------


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_rate_curve_csv(points: Sequence[RateCurvePoint], path) -> None:
    write_csv(
        path,
        ["snr_db", "r_msd", "r_msd_se", "r_smd", "r_smd_se", "r_pmd", "r_pmd_se"],
        [
            (p.snr_db, p.r_msd, p.r_msd_se, p.r_smd, p.r_smd_se, p.r_pmd, p.r_pmd_se)
            for p in points
        ],
    )


def write_error_rate_csv(points: Sequence[ErrorRatePoint], path) -> None:
    write_csv(
        path,
        ["snr_db", "decoder", "wer", "wer_lo", "wer_hi", "trials"],
        [(p.snr_db, p.decoder, p.wer, p.wer_lo, p.wer_hi, p.trials) for p in points],
    )


def write_nested_trials_csv(rows: Sequence[NestedTrial], path) -> None:
    levels = len(rows[0].level_success) if rows else 0
    header = ["trial", "snr_db", "success"] + [f"level{i+1}_success" for i in range(levels)]
    write_csv(
        path,
        header,
        [(r.trial, r.snr_db, r.success, *r.level_success) for r in rows],
    )


def write_complexity_csv(rows: Sequence[ComplexityRow], path) -> None:
    write_csv(
        path,
        ["q", "single_level_cost", "multilevel_cost", "ratio"],
        [(r.q, r.single_level_cost, r.multilevel_cost, r.ratio) for r in rows],
    )
