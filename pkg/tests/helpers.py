"""Shared test utilities: gradient probing and independent data builders."""

import numpy as np

from driftsel.autodiff import softmax_cross_entropy
from driftsel.classifier import resample_to_length
from driftsel.wright_fisher import simulate_batch, substream


def gradient_probe_check(network, x, y, n_probes=100, seed=0, h_scale=1e-5):
    """Compare analytic gradients against central differences at random weights.

    Probes where two step sizes disagree sit on a rectifier kink (the loss is
    non-smooth there, so a central difference estimates nothing); those are
    resampled without consulting the analytic value.  Returns
    (worst_relative_error, n_skipped).
    """
    loss = softmax_cross_entropy(network.forward(x, training=True), y)
    loss.backward()
    params = network.parameters()
    grads = [p.grad.copy() for p in params]

    def loss_value():
        return float(softmax_cross_entropy(network.forward(x, training=True), y).data)

    def central(flat, ci, h):
        orig = flat[ci]
        flat[ci] = orig + h
        hi = loss_value()
        flat[ci] = orig - h
        lo = loss_value()
        flat[ci] = orig
        return (hi - lo) / (2 * h)

    rng = np.random.default_rng(seed)
    worst = 0.0
    n_done = 0
    n_skipped = 0
    while n_done < n_probes:
        pi = int(rng.integers(len(params)))
        flat = params[pi].data.reshape(-1)
        ci = int(rng.integers(flat.size))
        h = h_scale * max(1.0, abs(flat[ci]))
        fd1 = central(flat, ci, h)
        fd2 = central(flat, ci, h / 4)
        if abs(fd1 - fd2) > 1e-5 * max(abs(fd1), abs(fd2), 1e-8):
            n_skipped += 1
            assert n_skipped < n_probes, "too many non-smooth probe points"
            continue
        analytic = grads[pi].reshape(-1)[ci]
        rel = abs(analytic - fd2) / max(abs(analytic), abs(fd2), 1e-8)
        worst = max(worst, rel)
        n_done += 1
    return worst, n_skipped


def strong_selection_test_set(config, n_per_class, seed):
    """Fresh simulated test data whose selection samples all have |2Ns| >= 10."""
    rng = substream(seed, 55)
    X, y = [], []
    n = rng.integers(config.n_range[0], config.n_range[1] + 1, size=n_per_class)
    t = rng.integers(config.t_range[0], config.t_range[1] + 1, size=n_per_class)
    x0 = rng.uniform(*config.x0_range, size=n_per_class)
    raw = simulate_batch(n, 0.0, x0, int(t.max()), rng)
    for i in range(n_per_class):
        X.append(resample_to_length(raw[i, : t[i] + 1], config.series_len))
        y.append(0)
    got = 0
    while got < n_per_class:
        m = n_per_class - got
        n = rng.integers(config.n_range[0], config.n_range[1] + 1, size=m)
        t = rng.integers(config.t_range[0], config.t_range[1] + 1, size=m)
        x0 = rng.uniform(*config.x0_range, size=m)
        s = np.exp(rng.uniform(np.log(config.s_range[0]), np.log(config.s_range[1]), size=m))
        s *= rng.integers(0, 2, size=m) * 2 - 1
        keep = 2 * n * np.abs(s) >= 10
        if not keep.any():
            continue
        n, t, x0, s = n[keep], t[keep], x0[keep], s[keep]
        raw = simulate_batch(n, s, x0, int(t.max()), rng)
        for i in range(len(n)):
            X.append(resample_to_length(raw[i, : t[i] + 1], config.series_len))
            y.append(1)
            got += 1
    return np.asarray(X), np.asarray(y)


def random_verb_records(rng, verb="v"):
    """Random multi-source records for one verb (at least 4 tokens)."""
    from driftsel.corpus import CountRecord, Source, Variant

    n_years = int(rng.integers(2, 40))
    start = int(rng.integers(1400, 1950))
    records = []
    for year in range(start, start + n_years):
        for variant in (Variant.BE, Variant.HAVE):
            count = int(rng.integers(0, 12))
            if count:
                source = (Source.EEBO, Source.GBOOKS_SCALED, Source.COHA)[
                    int(rng.integers(3))
                ]
                records.append(CountRecord(verb, variant, year, count, source))
    if sum(r.count for r in records) < 4:
        records.append(CountRecord(verb, Variant.BE, start, 4, Source.EEBO))
    return records


def brute_force_rebin(records, bin_sizes):
    """Token-expansion oracle: recount every bin from the canonical token list."""
    from driftsel.binning import tokens_of
    from driftsel.corpus import Variant

    tokens = tokens_of(records)
    out = []
    start = 0
    for size in bin_sizes:
        chunk = tokens[start : start + size]
        years = [year for year, _ in chunk]
        haves = sum(1 for _, variant in chunk if variant is Variant.HAVE)
        out.append((years[(len(chunk) - 1) // 2], haves / len(chunk), len(chunk)))
        start += size
    assert start == len(tokens)
    return out


def expected_boundaries(records, n_bins):
    """Independent re-derivation of the snapped boundary set at token level."""
    from driftsel.binning import tokens_of

    tokens = tokens_of(records)
    n = len(tokens)
    breaks = [i + 1 for i in range(n - 1) if tokens[i][0] != tokens[i + 1][0]]
    chosen = set()
    for j in range(1, n_bins):
        ideal = n * j / n_bins
        chosen.add(min(breaks, key=lambda b: (abs(b - ideal), b)))
    return sorted(chosen)
