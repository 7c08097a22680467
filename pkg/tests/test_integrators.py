import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from smefilter.control import ControlStrategy, Controller
from smefilter.errors import (
    DegenerateNorm, ModelError, QuantizationUnsupported, RecordMismatch, SchemeNotRecordDriven,
)
from smefilter.harness.oracles import lindblad_snapshots, scheme_agreement
from smefilter.integrators import (
    ConditionedFilter, EulerStepper, HamiltonianOrder, KrausStepper, SchemeKind, StepScheme,
    euler_maruyama_step, filter_trajectory, kraus_approx_step, kraus_approx_stepper, kraus_m, kraus_step,
    kraus_stepper,
    lindblad_propagate, lindblad_rhs, milstein_step, simulate_trajectory,
)
from smefilter.measurement import MeasurementRecord, NoiseStream, synthesize_record, wiener_batch
from smefilter.metrics import fidelity, min_eigenvalue, trace_distance
from smefilter.model import SmeModel, TwoQubitParams, steps_to_dt, two_qubit_model
from smefilter.qmat import dagger, pauli_string
from smefilter.state import maximally_mixed, pure_product

from conftest import density_matrices, random_density

FIRST, SECOND, EXACT = HamiltonianOrder.FIRST, HamiltonianOrder.SECOND, HamiltonianOrder.EXACT


def generic_model(rng):
    """Three commuting, non-Hermitian monitored channels, one unmonitored channel, distinct efficiencies."""
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = 0.3 * (g + dagger(g))
    basis, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    ls = tuple(basis @ np.diag(0.2 * (rng.normal(size=4) + 1j * rng.normal(size=4))) @ dagger(basis)
               for _ in range(3))
    v = 0.1 * (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    return SmeModel(h, monitored=ls, efficiencies=(0.9, 0.5, 1.0), unmonitored=(v,))


def literal_increment(rho, model, dW, dt, milstein=True):
    """The Euler(-Milstein) increment written out term by term, double sum included."""
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h) * dt
    for v in model.unmonitored:
        vd = dagger(v)
        out += (v @ rho @ vd - 0.5 * (vd @ v @ rho + rho @ vd @ v)) * dt
    ls, etas = model.monitored, model.efficiencies

    def a(op):
        return op @ rho + rho @ dagger(op)

    for r, l in enumerate(ls):
        ld = dagger(l)
        out += (l @ rho @ ld - 0.5 * (ld @ l @ rho + rho @ ld @ l)) * dt
        out += math.sqrt(etas[r]) * (a(l) - np.trace(a(l)) * rho) * dW[r]
    if milstein:
        for r, lr in enumerate(ls):
            for s, ls_ in enumerate(ls):
                x = lr @ ls_ @ rho + rho @ dagger(lr) @ dagger(ls_) + ls_ @ rho @ dagger(lr) + lr @ rho @ dagger(ls_)
                term = (x - np.trace(x) * rho
                        - np.trace(a(ls_)) * a(lr) - np.trace(a(lr)) * a(ls_)
                        + 2 * np.trace(a(lr)) * np.trace(a(ls_)) * rho)
                out += 0.5 * math.sqrt(etas[r] * etas[s]) * term * (dW[r] * dW[s] - (dt if r == s else 0))
    return out


def literal_m(model, dy, dt):
    d = model.dim
    m = np.eye(d, dtype=complex) - 1j * model.hamiltonian * dt
    for v in model.unmonitored:
        m -= 0.5 * dagger(v) @ v * dt
    for l in model.monitored:
        m -= 0.5 * dagger(l) @ l * dt
    etas = model.efficiencies
    for r, lr in enumerate(model.monitored):
        m += math.sqrt(etas[r]) * lr * dy[r]
        for s, ls_ in enumerate(model.monitored):
            m += 0.5 * math.sqrt(etas[r] * etas[s]) * lr @ ls_ * (dy[r] * dy[s] - (dt if r == s else 0))
    return m


# -- Euler family -----------------------------------------------------------


@pytest.mark.parametrize("milstein", [True, False])
def test_euler_matches_literal_increment(rng, milstein):
    model = generic_model(rng)
    dt = 0.01
    for _ in range(5):
        rho = random_density(rng)
        dW = rng.normal(size=3) * math.sqrt(dt)
        out, _ = EulerStepper(model, dt, FIRST, milstein=milstein)(rho, dW)
        np.testing.assert_allclose(out, rho + literal_increment(rho, model, dW, dt, milstein), atol=1e-13)


def test_second_order_adds_double_commutator(rng):
    model = generic_model(rng)
    dt = 0.05
    rho = random_density(rng)
    dW = rng.normal(size=3) * math.sqrt(dt)
    h = model.hamiltonian
    first, _ = EulerStepper(model, dt, FIRST)(rho, dW)
    second, _ = EulerStepper(model, dt, SECOND)(rho, dW)
    double = h @ (h @ rho - rho @ h) - (h @ rho - rho @ h) @ h
    np.testing.assert_allclose(second - first, -0.5 * double * dt * dt, atol=1e-14)


def test_euler_exact_hamiltonian_is_unitary_without_measurement():
    model = SmeModel(pauli_string("XI") + 0.3 * pauli_string("ZZ"))
    rho = pure_product((0, 0, 1), (1, 0, 0))
    out, _ = EulerStepper(model, 0.7, EXACT)(rho, np.zeros(0))
    u = scipy.linalg.expm(-0.7j * model.hamiltonian)
    np.testing.assert_allclose(out, u @ rho @ dagger(u), atol=1e-13)


def test_step_helpers_report_record(rng):
    model = two_qubit_model()
    rho = random_density(rng)
    dW = np.array([0.01, -0.02])
    dt = steps_to_dt(250)
    for step in (milstein_step, euler_maruyama_step):
        outcome = step(rho, model, dW, dt)
        np.testing.assert_allclose(outcome.dy, synthesize_record(rho, model, dW, dt))
        assert abs(np.trace(outcome.rho_next) - 1) < 1e-12


def test_milstein_strong_convergence():
    # fixed Brownian paths: coarse dW are sums of the fine ones
    model = two_qubit_model()
    fine = 4000
    dW = wiener_batch(3, range(8), 2, 0, fine, steps_to_dt(fine))
    rho0 = np.broadcast_to(pure_product((0, 0, 1), (0, 0, 1)), (8, 4, 4)).copy()

    def run(n):
        q = fine // n
        filt = ConditionedFilter(model, StepScheme(SchemeKind.EULER_MILSTEIN), steps_to_dt(n))
        rho, _ = filt.run_noise(rho0, dW.reshape(8, n, q, 2).sum(axis=2))
        return rho

    ref = run(fine)
    errs = [float(np.mean(trace_distance(run(n), ref))) for n in (200, 400, 800)]
    assert errs[0] > errs[1] > errs[2]
    rate = math.log2(errs[0] / errs[2]) / 2
    assert rate > 0.7, errs


# -- Kraus family -----------------------------------------------------------


def test_kraus_operator_matches_literal(rng):
    model = generic_model(rng)
    dy = rng.normal(size=3) * 0.1
    np.testing.assert_allclose(kraus_m(model, dy, 0.01, FIRST), literal_m(model, dy, 0.01), atol=1e-14)


def test_kraus_record_form_equals_state_form(rng):
    # M built from dy equals M built from dW plus the state-dependent drift of the record
    model = generic_model(rng)
    dt = 0.02
    rho = random_density(rng)
    dW = rng.normal(size=3) * math.sqrt(dt)
    dy = synthesize_record(rho, model, dW, dt)
    etas = model.efficiencies
    m_state = np.eye(4, dtype=complex) - 1j * model.hamiltonian * dt
    for op in model.unmonitored + model.monitored:
        m_state -= 0.5 * dagger(op) @ op * dt
    for r, lr in enumerate(model.monitored):
        mean = math.sqrt(etas[r]) * np.trace(lr @ rho + rho @ dagger(lr)).real
        m_state += math.sqrt(etas[r]) * lr * (math.sqrt(etas[r]) * mean / math.sqrt(etas[r]) * dt + dW[r])
        for s, ls_ in enumerate(model.monitored):
            m_state += 0.5 * math.sqrt(etas[r] * etas[s]) * lr @ ls_ * (dy[r] * dy[s] - (dt if r == s else 0))
    np.testing.assert_allclose(kraus_m(model, dy, dt, FIRST), m_state, atol=1e-14)


def test_kraus_step_literal(rng):
    model = generic_model(rng)
    dt = 0.01
    rho = random_density(rng)
    dy = rng.normal(size=3) * 0.1
    m = literal_m(model, dy, dt)
    num = m @ rho @ dagger(m) + sum(v @ rho @ dagger(v) * dt for v in model.unmonitored)
    num += sum((1 - e) * l @ rho @ dagger(l) * dt for l, e in zip(model.monitored, model.efficiencies))
    out = kraus_step(rho, model, dy, dt, FIRST)
    np.testing.assert_allclose(out.rho_next, num / np.trace(num), atol=1e-14)
    assert out.norm == pytest.approx(np.trace(num).real)


def test_kraus_two_qubit_derived_example():
    # rho = |00><00|, dy = (0.1, -0.05), dt = 0.01, default parameters, first-order Hamiltonian:
    # M|00> = (1 - i H dt - 2k dt + sqrt(2 eta k)(dy1 + dy2) + eta k ((dy1 + dy2)^2 - 2 dt)) |00>
    # off the |00> component only -i H dt |00> survives, i.e. -i (omega/2) dt on |01> and |10>
    p = TwoQubitParams()
    model = two_qubit_model(p)
    dt, dy = 0.01, np.array([0.1, -0.05])
    m = kraus_m(model, dy, dt, FIRST)
    s = dy.sum()
    diag00 = 1 - 1j * p.kappa * dt - 2 * p.k1 * dt + math.sqrt(2 * p.eta1 * p.k1) * s + p.eta1 * p.k1 * (s * s - 2 * dt)
    assert m[0, 0] == pytest.approx(diag00, abs=1e-15)
    assert m[1, 0] == pytest.approx(-0.5j * dt, abs=1e-15)
    assert m[2, 0] == pytest.approx(-0.5j * dt, abs=1e-15)
    assert m[3, 0] == 0


def test_approx_differs_by_quadratic_record_terms(rng):
    p = TwoQubitParams(eta1=0.7, k2=0.008)
    model = two_qubit_model(p)
    dt = steps_to_dt(50)
    dy = rng.normal(size=(6, 2)) * math.sqrt(dt)
    full = kraus_stepper(model, dt, SECOND).operator(dy)
    approx = kraus_approx_stepper(p, dt).operator(dy)
    quad = sum(0.5 * math.sqrt(model.efficiencies[r] * model.efficiencies[s])
               * (model.monitored[r] @ model.monitored[s])[None]
               * (dy[:, r] * dy[:, s] - (dt if r == s else 0))[:, None, None]
               for r in range(2) for s in range(2))
    np.testing.assert_allclose(full - approx, quad, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(density_matrices(), st.tuples(st.floats(-2, 2), st.floats(-2, 2)),
       st.sampled_from([5, 20, 50, 250]), st.sampled_from(["full", "approx"]))
def test_kraus_preserves_positivity(rho, dy, n, which):
    model = two_qubit_model()
    dt = steps_to_dt(n)
    stepper = kraus_stepper(model, dt) if which == "full" else kraus_approx_stepper(model.params, dt)
    out, norm = stepper(rho, np.array(dy))
    assert norm > 0
    assert abs(np.trace(out) - 1) < 1e-12
    assert np.array_equal(out, dagger(out))
    assert min_eigenvalue(out) >= -1e-12


def test_kraus_exact_order_is_unitary_without_measurement():
    model = SmeModel(pauli_string("XI") + 0.3 * pauli_string("ZZ"))
    rho = pure_product((0, 1, 0), (1, 0, 0))
    out, _ = kraus_stepper(model, 0.9, EXACT)(rho, np.zeros(0))
    u = scipy.linalg.expm(-0.9j * model.hamiltonian)
    np.testing.assert_allclose(out, u @ rho @ dagger(u), atol=1e-13)


def test_degenerate_norm():
    stepper = KrausStepper(np.zeros((2, 2), dtype=complex), [], {}, [])
    with pytest.raises(DegenerateNorm):
        stepper(np.eye(2, dtype=complex) / 2, np.zeros(0))


# -- unconditioned dynamics -------------------------------------------------


def test_lindblad_matches_liouvillian_exponential(rng):
    model = generic_model(rng)
    d = 4
    basis = np.eye(d * d).reshape(d * d, d, d)
    # column-stacked superoperator built from the right-hand side
    sup = np.stack([lindblad_rhs(b, model).reshape(-1) for b in basis], axis=1)
    rho0 = random_density(rng)
    t = 1.3
    exact = (scipy.linalg.expm(sup * t) @ rho0.reshape(-1)).reshape(d, d)
    np.testing.assert_allclose(lindblad_propagate(rho0, model, t, substeps=2000), exact, atol=1e-10)


@pytest.mark.parametrize("initial", ["mixed", "pure"])
def test_ensemble_average_tracks_lindblad(initial):
    model = two_qubit_model()
    n, cycles, reals = 250, 2, 400
    dt = steps_to_dt(n)
    rho0 = maximally_mixed(4) if initial == "mixed" else pure_product((0, 0, 1), (0, 0, 1))
    dW = wiener_batch(17, range(reals), 2, 0, n * cycles, dt)
    filt = ConditionedFilter(model, StepScheme(SchemeKind.KRAUS), dt)
    rho, _ = filt.run_noise(np.broadcast_to(rho0, (reals, 4, 4)).copy(), dW)
    exact = lindblad_snapshots(rho0, model, [0.0, float(cycles)])[-1]
    # Monte Carlo error of a 400-sample mean is ~0.01 in trace distance here
    assert trace_distance(rho.mean(axis=0), exact) < 0.04


def test_milstein_and_kraus_agree_on_fine_grid():
    report = scheme_agreement(realizations=4, workers=1)
    assert report.passed, report.line()


# -- filters and trajectories ------------------------------------------------


def test_quantization_rejected_for_euler():
    with pytest.raises(QuantizationUnsupported):
        ConditionedFilter(two_qubit_model(), StepScheme(SchemeKind.EULER_MILSTEIN), 0.01, quant_bits=4)


def test_approx_requires_two_qubit_model():
    model = SmeModel(pauli_string("ZZ"), monitored=(pauli_string("ZI"),), efficiencies=(1,))
    with pytest.raises(ModelError):
        ConditionedFilter(model, StepScheme(SchemeKind.KRAUS_APPROX), 0.01)


@pytest.mark.parametrize("kind,bits,control", [
    (SchemeKind.KRAUS, None, "none"), (SchemeKind.KRAUS, None, "y1y2"), (SchemeKind.KRAUS_APPROX, 3, "x1y2"),
])
def test_filter_reproduces_simulation(kind, bits, control):
    model = two_qubit_model()
    dt = steps_to_dt(50)
    scheme = StepScheme(kind)
    ctrl = Controller(ControlStrategy.from_name(control))
    sim = simulate_trajectory(maximally_mixed(4), model, scheme, NoiseStream(4, 2, 2), 300, dt, ctrl, bits,
                              snapshot_stride=50)
    filt = filter_trajectory(maximally_mixed(4), model, scheme, sim.record, ctrl, snapshot_stride=50,
                             dt=dt, steps=300)
    np.testing.assert_array_equal(filt.states, sim.states)
    np.testing.assert_array_equal(filt.times, sim.times)
    assert sim.times[-1] == pytest.approx(6.0)
    if bits:
        assert len(np.unique(sim.record.samples)) <= 2**bits


def test_filter_rejects_bad_records():
    model = two_qubit_model()
    rec = MeasurementRecord(steps_to_dt(50), np.zeros((100, 2)))
    with pytest.raises(SchemeNotRecordDriven):
        filter_trajectory(maximally_mixed(4), model, StepScheme(SchemeKind.EULER_MILSTEIN), rec)
    with pytest.raises(RecordMismatch):
        filter_trajectory(maximally_mixed(4), model, StepScheme(), MeasurementRecord(0.1, np.zeros((5, 3))))
    coarse = MeasurementRecord(steps_to_dt(25), np.zeros((50, 2)))
    with pytest.raises(RecordMismatch):
        filter_trajectory(maximally_mixed(4), model, StepScheme(), coarse, dt=steps_to_dt(50))
    with pytest.raises(RecordMismatch):
        filter_trajectory(maximally_mixed(4), model, StepScheme(), rec, steps=200)


@pytest.mark.parametrize("kind", list(SchemeKind))
def test_batch_is_independent_of_batch_size(kind):
    model = two_qubit_model()
    dt = steps_to_dt(100)
    dW = wiener_batch(9, range(5), 2, 0, 60, dt)
    rho0 = np.broadcast_to(pure_product((0, 0, 1), (1, 0, 0)), (5, 4, 4)).copy()
    ctrl = Controller(ControlStrategy.from_name("y1y2"))
    together, _ = ConditionedFilter(model, StepScheme(kind), dt, ctrl).run_noise(rho0, dW)
    for i in range(5):
        alone, _ = ConditionedFilter(model, StepScheme(kind), dt, ctrl).run_noise(rho0[i:i + 1], dW[i:i + 1])
        np.testing.assert_allclose(alone[0], together[i], rtol=0, atol=1e-15)


def test_trajectory_metrics_and_fidelity():
    model = two_qubit_model()
    dt = steps_to_dt(100)
    a = simulate_trajectory(maximally_mixed(4), model, StepScheme(), NoiseStream(1, 0, 2), 200, dt,
                            snapshot_stride=20)
    assert len(a.times) == 11
    assert np.all(a.purity().values <= 1 + 1e-12)
    f = a.fidelity_to(a)
    np.testing.assert_allclose(f.values, 1, atol=1e-7)
    assert np.all(a.concurrence().values >= 0)
    assert fidelity(a.states[-1], a.states[-1]) == pytest.approx(1, abs=1e-7)


# -- further worked examples --------------------------------------------------


def single_qubit(k=0.005, eta=1.0, h=None):
    return SmeModel(np.zeros((2, 2)) if h is None else h, monitored=(np.sqrt(2 * k) * pauli_string("Z"),),
                    efficiencies=(eta,))


def test_lindblad_rhs_examples():
    model = two_qubit_model()
    np.testing.assert_allclose(lindblad_rhs(maximally_mixed(4), model), 0, atol=1e-16)
    k = 0.005
    plus = np.full((2, 2), 0.5, dtype=complex)
    rhs = lindblad_rhs(plus, single_qubit(k))
    # dephasing D[sqrt(2k) Z] damps coherences at rate 4k
    assert rhs[0, 1] == pytest.approx(-4 * k * 0.5)
    assert rhs[0, 0] == 0


@settings(max_examples=30, deadline=None)
@given(density_matrices())
def test_lindblad_rhs_traceless(rho):
    assert abs(np.trace(lindblad_rhs(rho, two_qubit_model()))) < 1e-12


def test_lindblad_propagate_trivial_cases(rng):
    rho = random_density(rng)
    model = two_qubit_model()
    np.testing.assert_array_equal(lindblad_propagate(rho, model, 0.0), rho)
    np.testing.assert_allclose(lindblad_propagate(rho, SmeModel(np.zeros((4, 4))), 3.0, substeps=10), rho,
                               atol=1e-15)
    np.testing.assert_allclose(lindblad_propagate(maximally_mixed(4), model, 5.0, substeps=500),
                               maximally_mixed(4), atol=1e-15)


def test_milstein_zero_noise_richardson(rng):
    # with dW = 0 the (dW dW - delta dt) weight is -dt, so the Milstein part is a first-order
    # correction: at First order the increment is exactly linear in dt, and Second order adds
    # only -1/2 [H,[H,rho]] dt^2, which Richardson extrapolation isolates
    model = generic_model(rng)
    rho = random_density(rng)
    h = model.hamiltonian
    double = h @ (h @ rho - rho @ h) - (h @ rho - rho @ h) @ h

    def incr(dt, order):
        out, _ = EulerStepper(model, dt, order)(rho, np.zeros(3))
        return out - rho

    dt = 0.01
    np.testing.assert_allclose(incr(dt, FIRST), 2 * incr(dt / 2, FIRST), atol=1e-15)
    slope = incr(dt, FIRST) / dt
    np.testing.assert_allclose(slope, literal_increment(rho, model, np.zeros(3), 1.0), atol=1e-13)
    richardson = incr(dt, SECOND) - 2 * incr(dt / 2, SECOND)
    np.testing.assert_allclose(richardson, -0.25 * double * dt * dt, atol=1e-15)
    # the dt -> 0 slope differs from the Lindblad generator by the Milstein delta term alone
    assert np.max(np.abs(slope - lindblad_rhs(rho, model))) > 1e-4


def test_zero_efficiency_gives_deterministic_euler(rng):
    model = generic_model(rng)
    blind = SmeModel(model.hamiltonian, model.monitored, (0.0, 0.0, 0.0), model.unmonitored)
    rho = random_density(rng)
    dt = 0.01
    for step in (milstein_step, euler_maruyama_step):
        out = step(rho, blind, rng.normal(size=3) * 0.1, dt, FIRST)
        np.testing.assert_allclose(out.rho_next, rho + lindblad_rhs(rho, blind) * dt, atol=1e-15)


def test_single_qubit_diagonal_recursion():
    # H = 0, L = sqrt(2k) Z and diagonal rho: everything commutes with Z, so rho stays diagonal and
    # p = rho_00 follows a scalar recursion
    k, dt = 0.05, 0.01
    c = np.sqrt(2 * k)
    model = single_qubit(k)
    p = 0.3
    rho = np.diag([p, 1 - p]).astype(complex)
    for dW in (0.07, -0.12, 0.02, 0.0):
        out, _ = EulerStepper(model, dt, FIRST)(rho, np.array([dW]))
        z = 2 * p - 1
        innov = 2 * c * (p - z * p) * dW  # (A - a rho)_00 with A = 2c Z rho, a = 2c z
        # Milstein bracket on the |0><0| entry: X - Tr(X) rho vanishes, leaving -2 a A + 2 a^2 rho
        mil = 0.5 * (-2 * (2 * c * z) * (2 * c * p) + 2 * (2 * c * z) ** 2 * p)
        p_next = p + innov + mil * (dW * dW - dt)
        assert abs(out[0, 1]) == 0 and np.trace(out).real == pytest.approx(1, abs=1e-15)
        assert out[0, 0].real == pytest.approx(p_next, abs=1e-15)
        rho, p = out, out[0, 0].real


def test_milstein_minus_maruyama_is_double_sum(rng):
    model = generic_model(rng)
    rho = random_density(rng)
    dW = rng.normal(size=3) * 0.1
    dt = 0.01
    diff = milstein_step(rho, model, dW, dt, FIRST).rho_next - euler_maruyama_step(rho, model, dW, dt, FIRST).rho_next
    lit = literal_increment(rho, model, dW, dt, True) - literal_increment(rho, model, dW, dt, False)
    np.testing.assert_allclose(diff, lit, atol=1e-14)


def test_kraus_m_examples():
    np.testing.assert_array_equal(kraus_m(SmeModel(np.zeros((2, 2))), np.zeros(0), 0.1), np.eye(2))
    k, dt, d = 0.05, 0.02, 0.13
    m = kraus_m(single_qubit(k), np.array([d]), dt)
    expected = (1 - k * dt + k * (d * d - dt)) * np.eye(2) + np.sqrt(2 * k) * d * pauli_string("Z")
    np.testing.assert_allclose(m, expected, atol=1e-15)
    # two-qubit model at dy = 0: the diagonal double-sum terms give -eta_r k_r dt, L†L gives -2 k_r dt / 2 each
    p = TwoQubitParams()
    model = two_qubit_model(p)
    dt = steps_to_dt(250)
    h = model.hamiltonian
    lit = literal_m(model, np.zeros(2), dt) - 0.5 * h @ h * dt * dt
    direct = (np.eye(4) * (1 - (p.k1 + p.k2) * dt - (p.eta1 * p.k1 + p.eta2 * p.k2) * dt)
              - 1j * h * dt - 0.5 * h @ h * dt * dt)
    np.testing.assert_allclose(kraus_m(model, np.zeros(2), dt, SECOND), lit, atol=1e-16)
    np.testing.assert_allclose(kraus_m(model, np.zeros(2), dt, SECOND), direct, atol=1e-16)


def test_kraus_step_examples(rng):
    rho = random_density(rng, 2)
    out = kraus_step(rho, SmeModel(np.zeros((2, 2))), np.zeros(0), 0.1)
    np.testing.assert_allclose(out.rho_next, rho, atol=1e-15)
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    pure = np.outer(v, v.conj()) / np.vdot(v, v).real
    model = two_qubit_model(TwoQubitParams(eta1=1.0, eta2=1.0))
    for dy in rng.normal(size=(5, 2)) * 0.2:
        pure = kraus_step(pure, model, dy, steps_to_dt(50)).rho_next
        assert np.trace(pure @ pure).real == pytest.approx(1, abs=1e-12)


def test_kraus_positivity_bulk(rng):
    # 1e5 random (rho, dy) pairs in one batch, records well beyond typical sizes
    n = 100_000
    g = rng.normal(size=(n, 4, 4)) + 1j * rng.normal(size=(n, 4, 4))
    g[: n // 2, :, 2:] = 0  # half rank-deficient
    rho = g @ dagger(g)
    rho /= np.trace(rho, axis1=1, axis2=2).real[:, None, None]
    dy = rng.normal(size=(n, 2)) * rng.choice([0.01, 0.3, 3.0], size=(n, 1))
    model = two_qubit_model()
    for stepper in (kraus_stepper(model, steps_to_dt(50)), kraus_approx_stepper(model.params, steps_to_dt(50))):
        out, _ = stepper(rho, dy)
        assert np.min(np.linalg.eigvalsh(out)) >= -1e-10


def test_kraus_approx_examples(rng):
    p = TwoQubitParams(omega=0.0, kappa=0.0, eta1=1.0, eta2=1.0)
    rho = random_density(rng)
    out = kraus_approx_stepper(p, 0.05)(rho, np.zeros(2))[0]
    dt = 0.05
    np.testing.assert_allclose(kraus_approx_stepper(p, dt).operator(np.zeros(2)),
                               (1 - (p.k1 + p.k2) * dt) * np.eye(4), atol=1e-16)
    # rescaling by a constant operator leaves diagonal-only states unchanged
    diag = np.diag(np.diag(rho))
    out = kraus_approx_stepper(p, dt)(diag, np.zeros(2))[0]
    np.testing.assert_allclose(out, diag, atol=1e-15)


def test_kraus_approx_close_to_full(rng):
    model = two_qubit_model()
    dt = steps_to_dt(250)
    worst = 0.0
    for _ in range(50):
        rho = random_density(rng)
        dy = rng.normal(size=2) * np.sqrt(dt)
        full = kraus_step(rho, model, dy, dt).rho_next
        approx = kraus_approx_step(rho, model.params, dy, dt).rho_next
        worst = max(worst, 1 - fidelity(full, approx))
    assert worst < dt**2


def test_simulate_zero_steps():
    res = simulate_trajectory(maximally_mixed(4), two_qubit_model(), StepScheme(), NoiseStream(1, 0, 2), 0, 0.1)
    assert len(res.states) == 1 and res.record.steps == 0
    np.testing.assert_array_equal(res.states[0], maximally_mixed(4))
