"""Arbitrary-precision reference values for the unit tests.

Run with `python3 reference.py > ../support/reference_values.hpp`. The
output is committed; the tests never run Python.

Everything here is written independently of the C++ sources: the backward
recursion is transcribed directly with mpmath matrices at 50 digits, the
follower cost is recomputed from a stacked quadratic program, and ranks are
taken from mpmath SVDs.
"""

import mpmath as mp

mp.mp.dps = 50


def M(rows):
    return mp.matrix([[mp.mpf(str(v)) for v in r] for r in rows])


def eye(n):
    return mp.eye(n)


def inv(a):
    return a ** -1


def step(g, p1n, p2n, tn):
    a, b1, b2, q1, q2, r11, r12, r21, r22 = g
    n = a.rows
    i = eye(n)
    g1 = r11 + b1.T * p1n * b1
    g1i = inv(g1)
    m1 = i - b1 * g1i * b1.T * p1n
    s = g1i * b1.T * p1n
    ups = i + b1 * g1i * b1.T * tn
    w = inv(ups) * m1
    y = s + g1i * b1.T * tn * w
    g2 = r22 + b2.T * y.T * r21 * y * b2 + b2.T * w.T * p2n * w * b2
    m2 = b2.T * y.T * r21 * y * a + b2.T * w.T * p2n * w * a
    k2 = -inv(g2) * m2
    k1 = -y * (a + b2 * k2)
    t = a.T * m1.T * tn * w * (a + b2 * k2) + a.T * m1.T * p1n * b2 * k2
    p1 = q1 + a.T * p1n * a - a.T * p1n * b1 * g1i * b1.T * p1n * a
    p2 = q2 + (y * a).T * r21 * (y * a) + (w * a).T * p2n * (w * a) - m2.T * inv(g2) * m2
    return dict(P1=p1, P2=p2, T=t, K1=k1, K2=k2, Upsilon=ups, Gamma2=g2, W=w)


def solve(g, h1, h2, horizon):
    n = g[0].rows
    p1, p2, t = h1, h2, mp.zeros(n, n)
    out = []
    for _ in range(horizon + 1):
        r = step(g, p1, p2, t)
        out.append(r)
        p1, p2, t = r["P1"], r["P2"], r["T"]
    out.reverse()  # out[k] holds the time-k quantities
    return out


def stacked_costs(g, h1, h2, sol, x0):
    """J1 and J2 of the closed loop, with J1 also re-derived as the minimum of
    the follower's quadratic in the stacked u1 given the leader's sequence."""
    a, b1, b2, q1, q2, r11, r12, r21, r22 = g
    horizon = len(sol) - 1
    xs, u1s, u2s = [x0], [], []
    for k in range(horizon + 1):
        x = xs[-1]
        u1 = sol[k]["K1"] * x
        u2 = sol[k]["K2"] * x
        u1s.append(u1)
        u2s.append(u2)
        xs.append(a * x + b1 * u1 + b2 * u2)

    def quad(x, m):
        return (x.T * m * x)[0]

    j1 = sum(quad(xs[k], q1) + quad(u1s[k], r11) + quad(u2s[k], r12) for k in range(horizon + 1))
    j1 += quad(xs[-1], h1)
    j2 = sum(quad(xs[k], q2) + quad(u1s[k], r21) + quad(u2s[k], r22) for k in range(horizon + 1))
    j2 += quad(xs[-1], h2)

    # Follower quadratic with u2 fixed: x_k = A^k x0 + sum F(k,j) u1_j + c_k.
    n, m1 = a.rows, b1.cols
    dim = (horizon + 1) * m1
    hess = mp.zeros(dim, dim)
    grad = mp.zeros(dim, 1)
    free = [x0]
    for k in range(horizon + 1):
        free.append(a * free[-1] + b2 * u2s[k])
    sens = [[mp.zeros(n, m1) for _ in range(horizon + 1)] for _ in range(horizon + 2)]
    for k in range(1, horizon + 2):
        for j in range(horizon + 1):
            if j < k - 1:
                sens[k][j] = a * sens[k - 1][j]
            elif j == k - 1:
                sens[k][j] = b1
    for k in range(1, horizon + 2):
        w = h1 if k == horizon + 1 else q1
        for i in range(horizon + 1):
            for j in range(horizon + 1):
                blk = sens[k][i].T * w * sens[k][j]
                for r in range(m1):
                    for c in range(m1):
                        hess[i * m1 + r, j * m1 + c] += blk[r, c]
            gb = sens[k][i].T * w * free[k]
            for r in range(m1):
                grad[i * m1 + r] += gb[r]
    for i in range(horizon + 1):
        for r in range(m1):
            for c in range(m1):
                hess[i * m1 + r, i * m1 + c] += r11[r, c]
    const = sum(quad(free[k], q1) for k in range(horizon + 1)) + quad(free[-1], h1)
    const += sum(quad(u2s[k], r12) for k in range(horizon + 1))
    u = -(inv(hess) * grad)
    j1_stacked = (u.T * hess * u)[0] + 2 * (grad.T * u)[0] + const
    u1_gap = max(abs(u[i * m1 + r] - u1s[i][r]) for i in range(horizon + 1) for r in range(m1))
    return j1, j2, j1_stacked, u1_gap


def fmt(v):
    return mp.nstr(v, 25)


def emit_matrix(name, m):
    vals = ", ".join(fmt(m[i, j]) for i in range(m.rows) for j in range(m.cols))
    print(f"inline const Ref {name}{{{m.rows}, {m.cols}, {{{vals}}}}};")


def emit_scalar(name, v):
    print(f"inline constexpr double {name} = {fmt(v)};")


def svd_rank(m):
    s = mp.svd_r(m, compute_uv=False)
    smax = max(s)
    n = max(m.rows, m.cols)
    return sum(1 for v in s if v > n * mp.mpf(2) ** -52 * smax), min(s)


def main():
    print("#pragma once")
    print("// Generated by tests/oracles/reference.py (mpmath, 50 digits). Do not edit.")
    print()
    print("#include <vector>")
    print()
    print("namespace stackelq::reference {")
    print()
    print("struct Ref {")
    print("  int rows, cols;")
    print("  std::vector<double> data;  // row-major")
    print("};")
    print()

    # Scalar instance used in the golden regression.
    g5 = [M([[1]]), M([[2]]), M([[1]]), M([[1]]), M([[1]]), M([[0.6]]), M([[1]]), M([[1]]), M([[6.2]])]
    p1, p2, t = mp.zeros(1, 1), mp.zeros(1, 1), mp.zeros(1, 1)
    for _ in range(200):
        r = step(g5, p1, p2, t)
        p1, p2, t = r["P1"], r["P2"], r["T"]
    print("// Scalar instance A=1, B1=2, B2=1, Q1=Q2=1, R11=0.6, R12=R21=1, R22=6.2.")
    for key in ["P1", "P2", "T", "K1", "K2", "Upsilon", "Gamma2"]:
        emit_scalar(f"kScalar{key}", r[key][0, 0])
    abar = r["W"] * (g5[0] + g5[2] * r["K2"])
    emit_scalar("kScalarAbar", abar[0, 0])
    emit_scalar("kScalarP1Analytic", (4 + mp.sqrt(mp.mpf("25.6"))) / 8)
    print()

    # Two-state instance with nonzero terminal weights.
    g2 = [
        M([[1.1, 0.3], [-0.2, 0.8]]),
        M([[1.0], [0.5]]),
        M([[0.2], [1.0]]),
        M([[2.0, 0.5], [0.5, 1.0]]),
        M([[1.0, 0.0], [0.0, 3.0]]),
        M([[0.7]]),
        M([[0.4]]),
        M([[1.3]]),
        M([[2.5]]),
    ]
    h1 = M([[0.5, 0.1], [0.1, 0.3]])
    h2 = M([[1.0, -0.2], [-0.2, 0.6]])
    x0 = M([[1.5], [-0.7]])
    one = step(g2, mp.zeros(2, 2), mp.zeros(2, 2), mp.zeros(2, 2))
    print("// Two-state instance, one step from zero terminal weights.")
    for key in ["P1", "P2", "T", "K1", "K2"]:
        emit_matrix(f"kTwoStateOneStep{key}", one[key])
    sol = solve(g2, h1, h2, 3)
    print("// Same instance with terminal weights, N = 3, time-0 quantities.")
    for key in ["P1", "P2", "T", "K1", "K2"]:
        emit_matrix(f"kTwoStateN3{key}", sol[0][key])
    emit_matrix("kTwoStateN3K2Last", sol[3]["K2"])
    j1, j2, j1s, gap = stacked_costs(g2, h1, h2, sol, x0)
    assert abs(j1 - j1s) < mp.mpf("1e-30"), (j1, j1s)
    assert gap < mp.mpf("1e-30"), gap
    emit_scalar("kTwoStateN3J1", j1)
    emit_scalar("kTwoStateN3J2", j2)
    print()

    # Rank tests.
    a4 = M([[0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [-0.3, 0.2, -1.1, 0.9]])
    b4 = M([[0], [0], [0], [1]])
    kry = mp.zeros(4, 4)
    col = b4
    for j in range(4):
        for i in range(4):
            kry[i, j] = col[i]
        col = a4 * col
    rank, smin = svd_rank(kry)
    print("// Companion-form pair (n = 4, m1 = 1).")
    print(f"inline constexpr int kCompanionRank = {rank};")
    emit_scalar("kCompanionSigmaMin", smin)
    a3 = M([[0.5, 0, 0.2], [1, 0, -0.4], [0, 1, 0.7]])
    c3 = M([[0, 0, 1]])
    obs = mp.zeros(3, 3)
    row = c3
    for i in range(3):
        for j in range(3):
            obs[i, j] = row[0, j]
        row = row * a3
    rank, smin = svd_rank(obs)
    print("// Observer-canonical pair (n = 3) with Q2 = C'C.")
    print(f"inline constexpr int kObserverRank = {rank};")
    emit_scalar("kObserverSigmaMin", smin)
    print()
    print("}  // namespace stackelq::reference")


if __name__ == "__main__":
    main()
