//! Transversal section machinery: the section curve, reference compression
//! arcs, the delayed return map through its five-leg chain, and the smallest
//! mode-2 overshoot `h2*(x, h1)` that closes an orbit, found by coarse
//! polyline intersection with recursive step refinement.
//!
//! Conventions: mode 1 owns `{g < 0}` (contact), mode 2 owns `{g > 0}`
//! (flight). Section points are addressed by a scalar parameter `p`; the
//! equilibrium sits at the closure parameter `p_star`, and `|p - p_star|` is
//! the contraction measure used throughout.

use crate::error::{Result, SolverError};
use crate::hybrid::{BimodalAutomaton, HybridTrajectory, Mode, Transition};
use crate::ode::{
    flow, integrate_dense, integrate_until, DenseOutput, Direction, Graze, IntegratorSettings,
    Negated,
};
use crate::vec2::Vec2;

/// Default resolution of the closing-overshoot time bracket.
pub const DEFAULT_H2_TOL: f64 = 1e-12;

/// Horizon for "does the contact flow ever exit through the guard".
const GUARD_REACH_HORIZON: f64 = 60.0;
/// Horizon for the backward contact flow used to build reference arcs.
const BACKWARD_HORIZON: f64 = 10.0;
/// Horizon for the ballistic leg returning to the guard.
const FLIGHT_HORIZON: f64 = 60.0;
/// Horizon for the final contact leg landing on the section.
const LANDING_HORIZON: f64 = 10.0;
/// Horizon for the post-exit contact flow to re-cross the guard.
const RECROSS_HORIZON: f64 = 10.0;
/// Horizon for mode-2 return-time sampling.
const RETURN_HORIZON: f64 = 10.0;
/// Horizon for short contact probes in the assumption checks.
const CONTACT_HORIZON: f64 = 5.0;
/// Coarse cells per reference-arc duration in the intersection search.
const COARSE_CELLS: usize = 200;
/// Cells per window on refinement levels (one padded cell, ten times finer).
const REFINE_CELLS: usize = 30;
/// Penetration-delay sweep cap for the drop-region assumption check.
const PENETRATION_CAP: f64 = 0.01;

/// A parameterized transversal section for the mode-1 flow.
///
/// `s` is the scalar surface function (the section is `{s = 0}` over
/// `param_range`), `point`/`param` convert between the parameter and points
/// of the curve, and `direction` is the side from which the mode-1 flow
/// crosses. `p_star` is the parameter of the equilibrium, a closure point of
/// the curve; distance in the parameterization is measured against it.
pub struct PoincareCurve {
    s: Box<dyn Fn(Vec2) -> f64 + Send + Sync>,
    s_grad: Box<dyn Fn(Vec2) -> Vec2 + Send + Sync>,
    point_of: Box<dyn Fn(f64) -> Vec2 + Send + Sync>,
    param_of: Box<dyn Fn(Vec2) -> f64 + Send + Sync>,
    pub param_range: (f64, f64),
    pub direction: Direction,
    pub p_star: f64,
}

impl PoincareCurve {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        s: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
        s_grad: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static,
        point_of: impl Fn(f64) -> Vec2 + Send + Sync + 'static,
        param_of: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
        param_range: (f64, f64),
        direction: Direction,
        p_star: f64,
    ) -> Self {
        PoincareCurve {
            s: Box::new(s),
            s_grad: Box::new(s_grad),
            point_of: Box::new(point_of),
            param_of: Box::new(param_of),
            param_range,
            direction,
            p_star,
        }
    }

    pub fn s(&self, x: Vec2) -> f64 {
        (self.s)(x)
    }

    pub fn s_grad(&self, x: Vec2) -> Vec2 {
        (self.s_grad)(x)
    }

    pub fn point(&self, p: f64) -> Vec2 {
        (self.point_of)(p)
    }

    pub fn param(&self, x: Vec2) -> f64 {
        (self.param_of)(x)
    }

    /// Distance to the equilibrium in the section parameterization.
    pub fn star_distance(&self, x: Vec2) -> f64 {
        (self.param(x) - self.p_star).abs()
    }

    pub fn on_section(&self, x: Vec2, tol: f64) -> bool {
        self.s(x).abs() <= tol
    }
}

/// The canonical section for compression-oscillator models: zero velocity at
/// compressions deeper than the rest point, parameterized by position.
///
/// Construction fails with `CurveInvalid` if the mode-1 flow is not strictly
/// transversal to the curve anywhere on the sampled parameter range.
pub fn default_curve(a: &BimodalAutomaton) -> Result<PoincareCurve> {
    let (lo, hi) = a.suggested_section_range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(SolverError::Config(format!(
            "section parameter range ({lo}, {hi}) is not a proper interval"
        )));
    }
    let curve = PoincareCurve::new(
        |x| x.x2,
        |_| Vec2::new(0.0, 1.0),
        |p| Vec2::new(p, 0.0),
        |x| x.x1,
        (lo, hi),
        Direction::Rising,
        a.equilibrium.x1,
    );
    for k in 0..=100 {
        let p = lo + (hi - lo) * k as f64 / 100.0;
        let x = curve.point(p);
        let rate = curve.s_grad(x).dot(a.f1.eval(x));
        if rate <= 0.0 {
            return Err(SolverError::CurveInvalid(format!(
                "mode-1 flow is not transversal to the section at p = {p} (rate {rate:e})"
            )));
        }
    }
    Ok(curve)
}

/// Whether the mode-1 flow from the section point `x` exits through the
/// guard transversally within the horizon.
///
/// Points whose flow spirals into the equilibrium without touching the
/// guard, points that exit only tangentially, and points where the probe
/// integration fails all report `false`.
pub fn sp_tilde_contains(
    a: &BimodalAutomaton,
    curve: &PoincareCurve,
    x: Vec2,
    settings: &IntegratorSettings,
) -> bool {
    if !curve.on_section(x, settings.event_value_tol) {
        return false;
    }
    let s1 = a.mode_settings(Mode::One, settings);
    match integrate_until(
        a.f1.as_ref(),
        x,
        &|z| (a.guard)(z),
        Direction::Rising,
        Graze::Ignore,
        GUARD_REACH_HORIZON,
        &s1,
    ) {
        Ok((_, Some((_, hit, _)))) => a.guard_rate(Mode::One, hit) > settings.event_value_tol,
        _ => false,
    }
}

/// A mode-1 compression arc from a guard entry point `y` to a section
/// anchor `x`, stored forward in time.
pub struct ReferenceSegmentT {
    /// Dense forward trajectory from `y` (on the guard) to `x` (on the section).
    pub seg: DenseOutput,
    pub y: Vec2,
    pub x: Vec2,
}

impl ReferenceSegmentT {
    pub fn duration(&self) -> f64 {
        self.seg.duration()
    }
}

/// Build the reference arc into `x`: integrate the contact field backward to
/// the guard, then forward again so the stored arc carries dense output in
/// its natural orientation and lands on the section exactly.
pub fn reference_segment(
    a: &BimodalAutomaton,
    curve: &PoincareCurve,
    x: Vec2,
    settings: &IntegratorSettings,
) -> Result<ReferenceSegmentT> {
    let s1 = a.mode_settings(Mode::One, settings);
    let neg = Negated(a.f1.as_ref());
    let (_, hit) = integrate_until(
        &neg,
        x,
        &|z| (a.guard)(z),
        Direction::Rising,
        Graze::Ignore,
        BACKWARD_HORIZON,
        &s1,
    )?;
    let Some((tau, y, _)) = hit else {
        return Err(SolverError::GuardNotReached(format!(
            "backward contact flow from ({}, {}) stayed inside the domain for {BACKWARD_HORIZON} s",
            x.x1, x.x2
        )));
    };
    let (seg, land) = integrate_until(
        a.f1.as_ref(),
        y,
        &|z| curve.s(z),
        curve.direction,
        Graze::Ignore,
        2.0 * tau + 1e-3,
        &s1,
    )?;
    let Some((_, x_land, _)) = land else {
        return Err(SolverError::SectionNotReached(format!(
            "forward re-integration from the guard entry ({}, {}) missed the section",
            y.x1, y.x2
        )));
    };
    if x_land.dist(x) > 1e-6 {
        return Err(SolverError::SectionNotReached(format!(
            "reference arc did not close on its anchor: landed ({}, {}), wanted ({}, {})",
            x_land.x1, x_land.x2, x.x1, x.x2
        )));
    }
    Ok(ReferenceSegmentT { seg, y, x: x_land })
}

/// The five chain points of one delayed return, with the leg durations
/// `[exit, mode-1 overshoot, flight, mode-2 overshoot, landing]`.
#[derive(Debug, Clone, Copy)]
pub struct DelayedMapResult {
    pub x1: Vec2,
    pub x2: Vec2,
    pub x3: Vec2,
    pub x4: Vec2,
    pub x5: Vec2,
    pub h2_used: f64,
    pub times: [f64; 5],
}

/// Legs 1-3 of the chain: exit through the guard, mode-1 overshoot, flight
/// back down to the guard.
struct FlightLegs {
    x1: Vec2,
    t1: f64,
    x2: Vec2,
    x3: Vec2,
    t3: f64,
    /// Mode-1 dense output over `[0, t1 + h1]`.
    exit_dense: DenseOutput,
    /// Mode-2 dense output over `[0, t3]`, clock starting at `x2`.
    flight_dense: DenseOutput,
}

fn chain_to_touchdown(
    a: &BimodalAutomaton,
    curve: &PoincareCurve,
    x0: Vec2,
    h1: f64,
    settings: &IntegratorSettings,
) -> Result<FlightLegs> {
    if !(h1 >= 0.0) {
        return Err(SolverError::Config(format!(
            "mode-1 overshoot must be non-negative, got {h1}"
        )));
    }
    if !curve.on_section(x0, settings.event_value_tol) {
        return Err(SolverError::PreconditionViolated(format!(
            "start point ({}, {}) is not on the section",
            x0.x1, x0.x2
        )));
    }
    let s1 = a.mode_settings(Mode::One, settings);
    let s2 = a.mode_settings(Mode::Two, settings);

    let (d1, hit1) = integrate_until(
        a.f1.as_ref(),
        x0,
        &|z| (a.guard)(z),
        Direction::Rising,
        Graze::Ignore,
        GUARD_REACH_HORIZON,
        &s1,
    )?;
    let Some((t1, x1, _)) = hit1 else {
        return Err(SolverError::GuardNotReached(format!(
            "contact flow from ({}, {}) never exits through the guard (stays interior)",
            x0.x1, x0.x2
        )));
    };
    if a.guard_rate(Mode::One, x1) <= settings.event_value_tol {
        return Err(SolverError::GuardNotReached(format!(
            "contact flow exits only tangentially at ({}, {})",
            x1.x1, x1.x2
        )));
    }

    // The overshoot must stay shorter than the time the contact field takes
    // to carry the exit point back onto the guard.
    if h1 > 0.0 {
        let (_, recross) = integrate_until(
            a.f1.as_ref(),
            x1,
            &|z| (a.guard)(z),
            Direction::Falling,
            Graze::Ignore,
            RECROSS_HORIZON,
            &s1,
        )?;
        if let Some((t_rc, _, _)) = recross {
            if h1 >= t_rc {
                return Err(SolverError::PreconditionViolated(format!(
                    "mode-1 overshoot h1 = {h1} reaches the guard re-crossing at {t_rc}"
                )));
            }
        }
    }

    let mut exit_dense = d1;
    let x2 = if h1 > 0.0 {
        let d2 = integrate_dense(a.f1.as_ref(), x1, h1, &s1)?;
        let end = d2.end();
        for seg in d2.shifted(t1).segments() {
            exit_dense.push_internal(seg.clone());
        }
        end
    } else {
        x1
    };

    let (d3, hit3) = integrate_until(
        a.f2.as_ref(),
        x2,
        &|z| (a.guard)(z),
        Direction::Falling,
        Graze::Ignore,
        FLIGHT_HORIZON,
        &s2,
    )?;
    let Some((t3, x3, _)) = hit3 else {
        return Err(SolverError::GuardNotReached(format!(
            "flight from ({}, {}) never returned to the guard within {FLIGHT_HORIZON} s",
            x2.x1, x2.x2
        )));
    };
    if a.guard_rate(Mode::Two, x3).abs() <= settings.event_value_tol {
        return Err(SolverError::GuardNotReached(format!(
            "flight meets the guard only tangentially at ({}, {})",
            x3.x1, x3.x2
        )));
    }

    Ok(FlightLegs { x1, t1, x2, x3, t3, exit_dense, flight_dense: d3 })
}

fn landing_leg(
    a: &BimodalAutomaton,
    curve: &PoincareCurve,
    x4: Vec2,
    settings: &IntegratorSettings,
) -> Result<(f64, Vec2, DenseOutput)> {
    let s1 = a.mode_settings(Mode::One, settings);
    let (d5, hit) = integrate_until(
        a.f1.as_ref(),
        x4,
        &|z| curve.s(z),
        curve.direction,
        Graze::Ignore,
        LANDING_HORIZON,
        &s1,
    )?;
    let Some((t5, x5, _)) = hit else {
        return Err(SolverError::SectionNotReached(format!(
            "contact flow from ({}, {}) missed the section within {LANDING_HORIZON} s",
            x4.x1, x4.x2
        )));
    };
    Ok((t5, x5, d5))
}

/// Execute the full five-leg chain with both overshoots prescribed.
fn delayed_chain(
    a: &BimodalAutomaton,
    curve: &PoincareCurve,
    x0: Vec2,
    h1: f64,
    h2: f64,
    settings: &IntegratorSettings,
) -> Result<(DelayedMapResult, [DenseOutput; 3])> {
    if !(h2 >= 0.0) {
        return Err(SolverError::Config(format!(
            "mode-2 overshoot must be non-negative, got {h2}"
        )));
    }
    let legs = chain_to_touchdown(a, curve, x0, h1, settings)?;
    let s2 = a.mode_settings(Mode::Two, settings);
    let mut flight = legs.flight_dense;
    let x4 = if h2 > 0.0 {
        let d4 = integrate_dense(a.f2.as_ref(), legs.x3, h2, &s2)?;
        let end = d4.end();
        for seg in d4.shifted(legs.t3).segments() {
            flight.push_internal(seg.clone());
        }
        end
    } else {
        legs.x3
    };
    let (t5, x5, d5) = landing_leg(a, curve, x4, settings)?;
    let result = DelayedMapResult {
        x1: legs.x1,
        x2: legs.x2,
        x3: legs.x3,
        x4,
        x5,
        h2_used: h2,
        times: [legs.t1, h1, legs.t3, h2, t5],
    };
    Ok((result, [legs.exit_dense, flight, d5]))
}

/// The delayed return map: carry a section point through exit, overshoot,
/// flight, penetration, and landing, and return where it meets the section
/// again.
pub fn hpcmap(
    a: &BimodalAutomaton,
    curve: &PoincareCurve,
    x: Vec2,
    h1: f64,
    h2: f64,
    settings: &IntegratorSettings,
) -> Result<Vec2> {
    delayed_chain(a, curve, x, h1, h2, settings).map(|(r, _)| r.x5)
}

/// A verified delayed return: residual of the closure plus the assembled
/// hybrid trajectory of the whole loop.
pub struct OrbitVerification {
    pub x0: Vec2,
    pub residual: f64,
    pub chain: DelayedMapResult,
    pub trajectory: HybridTrajectory,
}

/// Run the chain for `(x0, h1, h2)` and measure how far it misses closing.
pub fn verify_closed_orbit(
    a: &BimodalAutomaton,
    curve: &PoincareCurve,
    x0: Vec2,
    h1: f64,
    h2: f64,
    settings: &IntegratorSettings,
) -> Result<OrbitVerification> {
    let (chain, [exit, flight, landing]) = delayed_chain(a, curve, x0, h1, h2, settings)?;
    let t_exit = chain.times[0] + chain.times[1];
    let t_touch = t_exit + chain.times[2] + chain.times[3];
    let mut trajectory = HybridTrajectory::empty();
    trajectory.push_piece(Mode::One, exit);
    trajectory.push_transition(Transition {
        t: t_exit,
        from: Mode::One,
        to: Mode::Two,
        delay: chain.times[1],
    });
    trajectory.push_piece(Mode::Two, flight.shifted(t_exit));
    trajectory.push_transition(Transition {
        t: t_touch,
        from: Mode::Two,
        to: Mode::One,
        delay: chain.times[3],
    });
    trajectory.push_piece(Mode::One, landing.shifted(t_touch));
    Ok(OrbitVerification {
        x0,
        residual: chain.x5.dist(x0),
        chain,
        trajectory,
    })
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x1 * b.x2 - a.x2 * b.x1
}

/// Proper intersection of segments `p0p1` and `q0q1`; returns the interior
/// parameters `(u, v)` of the meeting point on each segment.
fn seg_intersect(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> Option<(f64, f64)> {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let denom = cross(d1, d2);
    if denom.abs() < 1e-300 {
        return None;
    }
    let dq = q0 - p0;
    let u = cross(dq, d2) / denom;
    let v = cross(dq, d1) / denom;
    if (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v) {
        Some((u, v))
    } else {
        None
    }
}

fn polyline(dense: &DenseOutput, lo: f64, hi: f64, cells: usize) -> Vec<(f64, Vec2)> {
    (0..=cells)
        .map(|k| {
            let t = lo + (hi - lo) * k as f64 / cells as f64;
            (t, dense.eval(t))
        })
        .collect()
}

/// First crossing between two sampled curves: smallest index/parameter on
/// the first curve, earliest-parameter tie-break within a cell.
fn first_polyline_meeting(
    bs: &[(f64, Vec2)],
    ts: &[(f64, Vec2)],
) -> Option<(usize, f64, usize)> {
    for bk in 0..bs.len() - 1 {
        let mut best: Option<(f64, usize)> = None;
        for tk in 0..ts.len() - 1 {
            if let Some((u, _)) = seg_intersect(bs[bk].1, bs[bk + 1].1, ts[tk].1, ts[tk + 1].1) {
                if best.map_or(true, |(bu, _)| u < bu) {
                    best = Some((u, tk));
                }
            }
        }
        if let Some((u, tk)) = best {
            return Some((bk, u, tk));
        }
    }
    None
}

/// Earliest time at which the overshoot curve `b` meets the reference arc
/// `t_arc`, bracketed to `tol` by repeated ten-fold re-sampling around the
/// crossing cell.
fn first_curve_meeting(
    b: &DenseOutput,
    t_arc: &DenseOutput,
    tol: f64,
    a: &BimodalAutomaton,
) -> Result<f64> {
    let mut b_lo = b.t0();
    let mut b_hi = b.t1();
    let mut t_lo = t_arc.t0();
    let mut t_hi = t_arc.t1();
    let mut nb = 2 * COARSE_CELLS;
    let mut nt = COARSE_CELLS;
    let mut widened = false;
    for _ in 0..64 {
        let bs = polyline(b, b_lo, b_hi, nb);
        let ts = polyline(t_arc, t_lo, t_hi, nt);
        match first_polyline_meeting(&bs, &ts) {
            None => {
                if b_hi - b_lo >= b.duration() {
                    // Nothing at the coarse level: diagnose why.
                    let exit = bs.iter().find(|(_, z)| !a.domain_box.contains(*z));
                    return Err(match exit {
                        Some((te, ze)) => SolverError::NoIntersection(format!(
                            "delayed flight leaves the model's validity box at t = {te} \
                             ({}, {}) before meeting the reference arc",
                            ze.x1, ze.x2
                        )),
                        None => SolverError::NoIntersection(format!(
                            "delayed flight does not meet the reference arc within {} s",
                            b.duration()
                        )),
                    });
                }
                if widened {
                    return Err(SolverError::NoIntersection(
                        "crossing lost during refinement".into(),
                    ));
                }
                // Defensive: re-open the windows ten-fold around the current
                // centers and retry once.
                let bc = 0.5 * (b_lo + b_hi);
                let bw = 5.0 * (b_hi - b_lo);
                b_lo = (bc - bw).max(b.t0());
                b_hi = (bc + bw).min(b.t1());
                let tc = 0.5 * (t_lo + t_hi);
                let tw = 5.0 * (t_hi - t_lo);
                t_lo = (tc - tw).max(t_arc.t0());
                t_hi = (tc + tw).min(t_arc.t1());
                nb = 10 * REFINE_CELLS;
                nt = 10 * REFINE_CELLS;
                widened = true;
            }
            Some((bk, u, tk)) => {
                let cb = (b_hi - b_lo) / nb as f64;
                let cell_lo = b_lo + cb * bk as f64;
                if cb <= tol {
                    return Ok(cell_lo + u * cb);
                }
                let ct = (t_hi - t_lo) / nt as f64;
                let t_cell_lo = t_lo + ct * tk as f64;
                b_lo = (cell_lo - cb).max(b.t0());
                b_hi = (cell_lo + 2.0 * cb).min(b.t1());
                t_lo = (t_cell_lo - ct).max(t_arc.t0());
                t_hi = (t_cell_lo + 2.0 * ct).min(t_arc.t1());
                nb = REFINE_CELLS;
                nt = REFINE_CELLS;
                widened = false;
            }
        }
    }
    Err(SolverError::NoIntersection(
        "refinement failed to converge".into(),
    ))
}

/// Smallest mode-2 overshoot closing the orbit anchored at `x0` with mode-1
/// overshoot `h1`, together with the chain it produces.
///
/// The delayed flight is continued past the guard and intersected with the
/// reference arc into `x0`; landing on the arc means the subsequent contact
/// flow retraces it into the anchor, closing the loop. The first crossing is
/// located on coarse polylines (cell = arc duration / 200) and refined ten
/// times finer per level until the time bracket is below `h2_tol`.
pub fn h2_star(
    a: &BimodalAutomaton,
    curve: &PoincareCurve,
    x0: Vec2,
    h1: f64,
    h2_tol: f64,
    settings: &IntegratorSettings,
) -> Result<(f64, DelayedMapResult)> {
    if !(h2_tol > 0.0) || !h2_tol.is_finite() {
        return Err(SolverError::Config(format!(
            "overshoot bracket tolerance must be positive, got {h2_tol}"
        )));
    }
    let t_ref = reference_segment(a, curve, x0, settings)?;
    let legs = chain_to_touchdown(a, curve, x0, h1, settings)?;
    let s2 = a.mode_settings(Mode::Two, settings);
    let overshoot = integrate_dense(a.f2.as_ref(), legs.x3, 2.0 * t_ref.duration(), &s2)?;
    let h2 = first_curve_meeting(&overshoot, &t_ref.seg, h2_tol, a)?;
    let x4 = overshoot.eval(h2);
    let (t5, x5, _) = landing_leg(a, curve, x4, settings)?;
    Ok((
        h2,
        DelayedMapResult {
            x1: legs.x1,
            x2: legs.x2,
            x3: legs.x3,
            x4,
            x5,
            h2_used: h2,
            times: [legs.t1, h1, legs.t3, h2, t5],
        },
    ))
}

/// Mode-2 return time from `x` to the section, or `None` when the flight
/// exhausts the horizon, fails, or lands outside the validity box.
pub(crate) fn flight_return_time(
    a: &BimodalAutomaton,
    curve: &PoincareCurve,
    x: Vec2,
    settings: &IntegratorSettings,
) -> Option<f64> {
    let s2 = a.mode_settings(Mode::Two, settings);
    match integrate_until(
        a.f2.as_ref(),
        x,
        &|z| curve.s(z),
        Direction::Any,
        Graze::Ignore,
        RETURN_HORIZON,
        &s2,
    ) {
        Ok((_, Some((t, hit, _)))) if a.domain_box.contains(hit) => Some(t),
        _ => None,
    }
}

/// Guard point with prescribed velocity, by bisecting the guard function
/// along the position axis across the validity box.
fn guard_point_at_velocity(a: &BimodalAutomaton, v: f64) -> Option<Vec2> {
    let g = |xi: f64| (a.guard)(Vec2::new(xi, v));
    let (mut lo, mut hi) = a.domain_box.x1;
    let (glo, ghi) = (g(lo), g(hi));
    if glo == 0.0 {
        return Some(Vec2::new(lo, v));
    }
    if ghi == 0.0 {
        return Some(Vec2::new(hi, v));
    }
    if glo.signum() == ghi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return Some(Vec2::new(mid, v));
        }
        if gm.signum() == glo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
            break;
        }
    }
    Some(Vec2::new(0.5 * (lo + hi), v))
}

/// Infimum (over sampled inward guard points) of the mode-2 return time to
/// the section; `None` means no sampled flight returns within the horizon.
pub fn t2_estimate(
    a: &BimodalAutomaton,
    curve: &PoincareCurve,
    n_samples: usize,
    settings: &IntegratorSettings,
) -> Option<f64> {
    let mut best: Option<f64> = None;
    for k in 0..n_samples {
        let v = a.domain_box.x2.0 * (k + 1) as f64 / (n_samples + 1) as f64;
        let Some(x) = guard_point_at_velocity(a, v) else {
            continue;
        };
        // Only inward crossings of the guard feed the penetration region.
        if a.guard_rate(Mode::Two, x) >= -settings.event_value_tol {
            continue;
        }
        if let Some(t) = flight_return_time(a, curve, x, settings) {
            best = Some(best.map_or(t, |b: f64| b.min(t)));
        }
    }
    best
}

/// One sampled hypothesis check with pass/fail counts and a first witness.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub detail: String,
    pub samples: usize,
    pub violations: usize,
    pub witness: Option<String>,
}

impl AssumptionCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn record(&mut self, witness: String) {
        self.violations += 1;
        if self.witness.is_none() {
            self.witness = Some(witness);
        }
    }
}

/// Sampled evidence for the structural hypotheses behind the return-map
/// construction, plus contextual sanity probes.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub context: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    /// All four structural hypotheses hold on the sample (context probes are
    /// informative only).
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed())
    }

    /// Human-readable report lines.
    pub fn lines(&self) -> Vec<String> {
        let fmt = |c: &AssumptionCheck, tag: &str| {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            let mut line = format!(
                "{status} {tag}{}: {} ({} samples, {} violations)",
                c.name, c.detail, c.samples, c.violations
            );
            if let Some(w) = &c.witness {
                line.push_str(&format!(" — first witness: {w}"));
            }
            line
        };
        self.checks
            .iter()
            .map(|c| fmt(c, ""))
            .chain(self.context.iter().map(|c| fmt(c, "[context] ")))
            .collect()
    }
}

fn injectivity_check(
    a: &BimodalAutomaton,
    curve: &PoincareCurve,
    n: usize,
    settings: &IntegratorSettings,
) -> AssumptionCheck {
    let mut check = AssumptionCheck {
        name: "section-norm-injectivity",
        detail: "|point(p)| is strictly monotone and the section avoids the switching surface"
            .into(),
        samples: n + 1,
        violations: 0,
        witness: None,
    };
    let (lo, hi) = curve.param_range;
    let mut prev_norm: Option<f64> = None;
    let mut dir = 0.0f64;
    for k in 0..=n {
        let p = lo + (hi - lo) * k as f64 / n as f64;
        let x = curve.point(p);
        let gv = (a.guard)(x);
        if gv.abs() <= settings.event_value_tol {
            check.record(format!("section point at p = {p} touches the switching surface"));
        }
        let norm = x.norm();
        if let Some(prev) = prev_norm {
            let step = norm - prev;
            if step == 0.0 {
                check.record(format!("|point(p)| stalls at p = {p}"));
            } else if dir == 0.0 {
                dir = step.signum();
            } else if step.signum() != dir {
                check.record(format!("|point(p)| reverses direction at p = {p}"));
            }
        }
        prev_norm = Some(norm);
    }
    check
}

fn drop_region_check(
    a: &BimodalAutomaton,
    curve: &PoincareCurve,
    n: usize,
    settings: &IntegratorSettings,
) -> AssumptionCheck {
    let mut check = AssumptionCheck {
        name: "penetration-recovers-through-section",
        detail: format!(
            "contact flow from every sampled penetration point (inward guard velocities, \
             overshoots up to {PENETRATION_CAP} s) reaches the section before re-crossing the guard"
        ),
        samples: 0,
        violations: 0,
        witness: None,
    };
    let s1 = a.mode_settings(Mode::One, settings);
    let nv = (n as f64).sqrt().ceil() as usize;
    let nh = n.div_ceil(nv);
    for i in 0..nv {
        let v = a.domain_box.x2.0 * (i + 1) as f64 / (nv + 1) as f64;
        let Some(xg) = guard_point_at_velocity(a, v) else {
            continue;
        };
        if a.guard_rate(Mode::Two, xg) >= -settings.event_value_tol {
            continue;
        }
        for j in 0..nh {
            let h = PENETRATION_CAP * j as f64 / nh as f64;
            let s2 = a.mode_settings(Mode::Two, settings);
            let Ok(z) = flow(a.f2.as_ref(), xg, h, &s2) else {
                continue;
            };
            if !a.domain_box.contains(z) {
                continue;
            }
            check.samples += 1;
            let to_section = integrate_until(
                a.f1.as_ref(),
                z,
                &|w| curve.s(w),
                curve.direction,
                Graze::Ignore,
                CONTACT_HORIZON,
                &s1,
            );
            let to_guard = integrate_until(
                a.f1.as_ref(),
                z,
                &|w| (a.guard)(w),
                Direction::Rising,
                Graze::Ignore,
                CONTACT_HORIZON,
                &s1,
            );
            let t_s = match to_section {
                Ok((_, Some((t, _, _)))) => Some(t),
                _ => None,
            };
            let t_g = match to_guard {
                Ok((_, Some((t, _, _)))) => Some(t),
                _ => None,
            };
            match (t_s, t_g) {
                (None, _) => check.record(format!(
                    "penetration point ({}, {}) never returns to the section",
                    z.x1, z.x2
                )),
                (Some(ts), Some(tg)) if ts >= tg => check.record(format!(
                    "penetration point ({}, {}) re-crosses the guard (t = {tg}) before \
                     the section (t = {ts})",
                    z.x1, z.x2
                )),
                _ => {}
            }
        }
    }
    check
}

fn flight_transversality_check(
    a: &BimodalAutomaton,
    n: usize,
    settings: &IntegratorSettings,
) -> AssumptionCheck {
    let mut check = AssumptionCheck {
        name: "flight-lands-transversally",
        detail: "every sampled flight start reaches the guard with a nonzero crossing rate"
            .into(),
        samples: 0,
        violations: 0,
        witness: None,
    };
    let s2 = a.mode_settings(Mode::Two, settings);
    let na = (n as f64).sqrt().ceil() as usize;
    let nb = n.div_ceil(na);
    let (x1_lo, x1_hi) = a.domain_box.x1;
    let v_cap = 0.5 * a.domain_box.x2.1.min(-a.domain_box.x2.0);
    for i in 0..na {
        let xi = x1_lo + (x1_hi - x1_lo) * (i as f64 + 0.5) / na as f64;
        for j in 0..nb {
            let v = -v_cap + 2.0 * v_cap * (j as f64 + 0.5) / nb as f64;
            let x = Vec2::new(xi, v);
            // Only points strictly inside the flight domain qualify.
            if (a.guard)(x) <= settings.event_value_tol {
                continue;
            }
            check.samples += 1;
            match integrate_until(
                a.f2.as_ref(),
                x,
                &|w| (a.guard)(w),
                Direction::Falling,
                Graze::Ignore,
                RETURN_HORIZON,
                &s2,
            ) {
                Ok((_, Some((_, hit, _)))) => {
                    if a.guard_rate(Mode::Two, hit).abs() <= settings.event_value_tol {
                        check.record(format!(
                            "flight from ({}, {}) lands tangentially at ({}, {})",
                            x.x1, x.x2, hit.x1, hit.x2
                        ));
                    }
                }
                _ => check.record(format!(
                    "flight from ({}, {}) never lands on the guard within {RETURN_HORIZON} s",
                    x.x1, x.x2
                )),
            }
        }
    }
    check
}

fn exit_transversality_check(
    a: &BimodalAutomaton,
    curve: &PoincareCurve,
    n: usize,
    settings: &IntegratorSettings,
) -> AssumptionCheck {
    let mut check = AssumptionCheck {
        name: "contact-exits-transversally",
        detail: "every sampled section point whose contact flow reaches the guard crosses \
                 it with a nonzero rate"
            .into(),
        samples: 0,
        violations: 0,
        witness: None,
    };
    let s1 = a.mode_settings(Mode::One, settings);
    let (lo, hi) = curve.param_range;
    for k in 0..=n {
        let p = lo + (hi - lo) * k as f64 / n as f64;
        let x = curve.point(p);
        match integrate_until(
            a.f1.as_ref(),
            x,
            &|w| (a.guard)(w),
            Direction::Rising,
            Graze::Ignore,
            GUARD_REACH_HORIZON,
            &s1,
        ) {
            Ok((_, Some((_, hit, _)))) => {
                check.samples += 1;
                if a.guard_rate(Mode::One, hit).abs() <= settings.event_value_tol {
                    check.record(format!(
                        "exit from p = {p} crosses the guard tangentially at ({}, {})",
                        hit.x1, hit.x2
                    ));
                }
            }
            // Interior points whose flow never exits are outside the scope
            // of this hypothesis.
            _ => {}
        }
    }
    check
}

fn contraction_probe(
    a: &BimodalAutomaton,
    curve: &PoincareCurve,
    settings: &IntegratorSettings,
) -> AssumptionCheck {
    let mut check = AssumptionCheck {
        name: "undelayed-return-contracts",
        detail: "the exact return map moves sampled section points strictly closer to the \
                 equilibrium (dissipation probe: a lossless model fails here)"
            .into(),
        samples: 0,
        violations: 0,
        witness: None,
    };
    let (lo, hi) = curve.param_range;
    for frac in [0.2, 0.5, 0.8] {
        let p = lo + (hi - lo) * frac;
        let x = curve.point(p);
        match hpcmap(a, curve, x, 0.0, 0.0, settings) {
            Ok(x5) => {
                check.samples += 1;
                let d0 = curve.star_distance(x);
                let d5 = curve.star_distance(x5);
                if d5 >= d0 * (1.0 - 1e-9) {
                    check.record(format!(
                        "return from p = {p} does not contract: distance {d0:e} -> {d5:e}"
                    ));
                }
            }
            // Points outside the exit region are not probed.
            Err(_) => {}
        }
    }
    check
}

/// Sample the structural hypotheses the return-map construction rests on.
///
/// The four checks cover: section norm-injectivity (with guard disjointness
/// as context), recovery of penetration points through the section before
/// any guard re-cross, transversal flight landings, and transversal contact
/// exits. A dissipation probe of the exact return map is attached as
/// context; it flags lossless models whose equilibrium cannot attract.
pub fn check_assumptions(
    a: &BimodalAutomaton,
    curve: &PoincareCurve,
    n_samples: usize,
    settings: &IntegratorSettings,
) -> AssumptionReport {
    let n = n_samples.max(1);
    AssumptionReport {
        checks: vec![
            injectivity_check(a, curve, n, settings),
            drop_region_check(a, curve, n, settings),
            flight_transversality_check(a, n, settings),
            exit_transversality_check(a, curve, n, settings),
        ],
        context: vec![contraction_probe(a, curve, settings)],
    }
}
