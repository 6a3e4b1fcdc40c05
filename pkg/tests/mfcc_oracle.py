"""Slow, loop-based MFCC written directly from the textbook definitions.

Shares no code with ``wavefuzz.mfcc``: plain Python floats, an explicit DFT,
double-loop DCT. Used only to produce frozen reference fixtures.
"""

import math


def mel(f):
    return 2595.0 * math.log10(1.0 + f / 700.0)


def inv_mel(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def triangles(n_mels, n_fft, sample_rate, fmin, fmax):
    lo, hi = mel(fmin), mel(fmax)
    points = [lo + (hi - lo) * i / (n_mels + 1) for i in range(n_mels + 2)]
    bins = [int(math.floor((n_fft + 1) * inv_mel(p) / sample_rate)) for p in points]
    n_bins = n_fft // 2 + 1
    rows = []
    for m in range(n_mels):
        a, b, c = bins[m], bins[m + 1], bins[m + 2]
        row = [0.0] * n_bins
        for k in range(n_bins):
            if a <= k < b:
                row[k] = (k - a) / (b - a)
            elif b <= k < c:
                row[k] = (c - k) / (c - b)
        rows.append(row)
    return rows


def dft_power(frame, n_fft):
    out = []
    for k in range(n_fft // 2 + 1):
        re = im = 0.0
        for n, v in enumerate(frame):
            ang = 2.0 * math.pi * k * n / n_fft
            re += v * math.cos(ang)
            im -= v * math.sin(ang)
        out.append((re * re + im * im) / n_fft)
    return out


def dct2(vec, n_out):
    M = len(vec)
    out = []
    for j in range(n_out):
        s = math.sqrt(1.0 / M) if j == 0 else math.sqrt(2.0 / M)
        out.append(s * sum(vec[m] * math.cos(math.pi * j * (m + 0.5) / M) for m in range(M)))
    return out


def deltas(rows, W):
    T = len(rows)
    C = len(rows[0])
    den = 2.0 * sum(n * n for n in range(1, W + 1))
    out = []
    for t in range(T):
        d = []
        for c in range(C):
            acc = 0.0
            for n in range(1, W + 1):
                acc += n * (rows[min(t + n, T - 1)][c] - rows[max(t - n, 0)][c])
            d.append(acc / den)
        out.append(d)
    return out


def mfcc(samples, sample_rate, preemph=0.97, frame_ms=25.0, hop_ms=10.0, n_fft=512,
         n_mels=26, n_ceps=13, W=2, floor=1e-10, fmin=0.0, fmax=None):
    fmax = sample_rate / 2.0 if fmax is None else fmax
    x = [float(v) for v in samples]
    y = [x[0]] + [x[n] - preemph * x[n - 1] for n in range(1, len(x))]
    N = int(round(frame_ms * sample_rate / 1000.0))
    H = int(round(hop_ms * sample_rate / 1000.0))
    T = 1 + (len(y) - N) // H
    win = [0.54 - 0.46 * math.cos(2.0 * math.pi * n / (N - 1)) for n in range(N)]
    fb = triangles(n_mels, n_fft, sample_rate, fmin, fmax)
    static = []
    for t in range(T):
        frame = [y[t * H + n] * win[n] for n in range(N)]
        if any(frame):
            P = dft_power(frame, n_fft)
        else:
            P = [0.0] * (n_fft // 2 + 1)
        logs = []
        for row in fb:
            e = sum(h * p for h, p in zip(row, P))
            logs.append(math.log(max(e, floor)))
        static.append(dct2(logs, n_ceps))
    d1 = deltas(static, W)
    d2 = deltas(d1, W)
    return [s + a + b for s, a, b in zip(static, d1, d2)]
