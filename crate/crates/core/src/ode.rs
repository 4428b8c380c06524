//! Adaptive Dormand–Prince 5(4) integration of planar autonomous ODEs with
//! dense (continuous) output and scalar-event location.
//!
//! This is the numerical substrate for every flow evaluation in the crate:
//! single-shot endpoint flows, dense trajectories, and first-crossing
//! detection of scalar surface functions along a trajectory.

use crate::error::{Result, SolverError};
use crate::vec2::Vec2;

/// Autonomous planar vector field.
pub trait VectorField: Sync {
    fn eval(&self, x: Vec2) -> Vec2;
}

impl<F: Fn(Vec2) -> Vec2 + Sync> VectorField for F {
    fn eval(&self, x: Vec2) -> Vec2 {
        self(x)
    }
}

/// Time-reversed view of a field: integrates the negated right-hand side.
pub struct Negated<'a>(pub &'a dyn VectorField);

impl VectorField for Negated<'_> {
    fn eval(&self, x: Vec2) -> Vec2 {
        -self.0.eval(x)
    }
}

/// Step-size and event-location tolerances.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorSettings {
    /// Relative local-error tolerance per step.
    pub rel_tol: f64,
    /// Absolute local-error tolerance per step (state units).
    pub abs_tol: f64,
    /// Width to which an event-time bracket is bisected (seconds).
    pub event_time_tol: f64,
    /// Magnitude below which a surface-function value counts as "on" the
    /// surface; also the arming threshold for crossing detection.
    pub event_value_tol: f64,
    /// Hard cap on the step size (seconds). Callers lower this in stiff
    /// regimes; the contact mode of the ball oscillates at ~248 rad/s.
    pub max_step: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            event_time_tol: 1e-12,
            event_value_tol: 1e-9,
            max_step: 1e-2,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        let all_pos = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.event_time_tol > 0.0
            && self.event_value_tol > 0.0
            && self.max_step > 0.0;
        if !all_pos {
            return Err(SolverError::Config(
                "all integrator tolerances must be strictly positive".into(),
            ));
        }
        if self.event_time_tol > self.max_step {
            return Err(SolverError::Config(
                "event_time_tol must not exceed max_step".into(),
            ));
        }
        Ok(())
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }
}

/// Any state component beyond this magnitude is treated as divergence.
const STATE_BOUND: f64 = 1e6;
/// Step sizes below this abort integration.
const MIN_STEP: f64 = 1e-14;
/// Samples per accepted step when scanning for event sign changes.
const EVENT_SUBSAMPLES: usize = 16;

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// Fifth-order solution weights (also the a7j row; the pair is FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Embedded error weights (5th minus 4th order solution).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense-output coefficients for the quartic interpolant.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted integrator step with its continuous interpolant.
///
/// The valid window `[win0, win1]` may be clipped (by slicing) to a
/// sub-interval of the step that produced the interpolation basis, which is
/// kept separately as `base_t`/`base_h`.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    win0: f64,
    win1: f64,
    base_t: f64,
    base_h: f64,
    cont: [Vec2; 5],
    x_begin: Vec2,
    x_end: Vec2,
}

impl DenseSegment {
    /// Start of the valid time window.
    pub fn t0(&self) -> f64 {
        self.win0
    }

    /// End of the valid time window.
    pub fn t1(&self) -> f64 {
        self.win1
    }

    /// State at `t0()`.
    pub fn x0(&self) -> Vec2 {
        self.x_begin
    }

    /// State at `t1()`.
    pub fn x1(&self) -> Vec2 {
        self.x_end
    }

    /// Evaluate the interpolant. Valid for `t` in `[t0, t1]`; evaluating in
    /// the interpolation basis just outside the window stays accurate and is
    /// used internally when refining brackets that straddle a clip point.
    pub fn eval(&self, t: f64) -> Vec2 {
        let theta = (t - self.base_t) / self.base_h;
        let theta1 = 1.0 - theta;
        self.cont[0]
            + theta
                * (self.cont[1]
                    + theta1 * (self.cont[2] + theta * (self.cont[3] + theta1 * self.cont[4])))
    }

    /// Restrict the valid window to `[a, b]` (must lie within the window).
    fn clipped(&self, a: f64, b: f64) -> DenseSegment {
        let mut s = self.clone();
        s.win0 = a;
        s.win1 = b;
        s.x_begin = if a == self.win0 { self.x_begin } else { self.eval(a) };
        s.x_end = if b == self.win1 { self.x_end } else { self.eval(b) };
        s
    }

    fn shifted(&self, dt: f64) -> DenseSegment {
        let mut s = self.clone();
        s.win0 += dt;
        s.win1 += dt;
        s.base_t += dt;
        s
    }
}

/// A contiguous dense trajectory: consecutive segments share endpoints.
#[derive(Debug, Clone, Default)]
pub struct DenseOutput {
    segments: Vec<DenseSegment>,
}

impl DenseOutput {
    pub fn empty() -> Self {
        DenseOutput { segments: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[DenseSegment] {
        &self.segments
    }

    pub fn t0(&self) -> f64 {
        self.segments.first().map_or(0.0, |s| s.win0)
    }

    pub fn t1(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.win1)
    }

    pub fn duration(&self) -> f64 {
        self.t1() - self.t0()
    }

    pub fn start(&self) -> Vec2 {
        self.segments.first().expect("empty dense output").x_begin
    }

    pub fn end(&self) -> Vec2 {
        self.segments.last().expect("empty dense output").x_end
    }

    /// Evaluate at time `t`, clamped to the covered span.
    pub fn eval(&self, t: f64) -> Vec2 {
        assert!(!self.segments.is_empty(), "eval on empty dense output");
        let t = t.clamp(self.t0(), self.t1());
        let idx = self
            .segments
            .partition_point(|s| s.win1 < t)
            .min(self.segments.len() - 1);
        self.segments[idx].eval(t)
    }

    /// `n + 1` equispaced samples over the covered span (including both ends).
    pub fn sample(&self, n: usize) -> Vec<(f64, Vec2)> {
        let (a, b) = (self.t0(), self.t1());
        (0..=n)
            .map(|k| {
                let t = a + (b - a) * (k as f64) / (n as f64).max(1.0);
                (t, self.eval(t))
            })
            .collect()
    }

    /// Restriction to `[a, b]`.
    pub fn slice(&self, a: f64, b: f64) -> Result<DenseOutput> {
        let (lo, hi) = (self.t0(), self.t1());
        let pad = 1e-12;
        if !(a < b) || a < lo - pad || b > hi + pad {
            return Err(SolverError::Range(format!(
                "window [{a}, {b}] outside trajectory span [{lo}, {hi}]"
            )));
        }
        let a = a.max(lo);
        let b = b.min(hi);
        let mut out = Vec::new();
        for s in &self.segments {
            if s.win1 <= a || s.win0 >= b {
                continue;
            }
            out.push(s.clipped(s.win0.max(a), s.win1.min(b)));
        }
        Ok(DenseOutput { segments: out })
    }

    /// Shift all times by `dt`.
    pub fn shifted(&self, dt: f64) -> DenseOutput {
        DenseOutput { segments: self.segments.iter().map(|s| s.shifted(dt)).collect() }
    }

    fn push(&mut self, seg: DenseSegment) {
        self.segments.push(seg);
    }

    /// Append a segment that continues this output (crate-internal plumbing
    /// for trajectory assembly).
    pub(crate) fn push_internal(&mut self, seg: DenseSegment) {
        debug_assert!(
            self.segments.is_empty() || seg.win0 >= self.t1() - 1e-12,
            "appended segment must continue the output"
        );
        self.segments.push(seg);
    }
}

/// Crossing direction filter for event location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
    Any,
}

impl Direction {
    fn matches(self, dir: i8) -> bool {
        match self {
            Direction::Rising => dir > 0,
            Direction::Falling => dir < 0,
            Direction::Any => true,
        }
    }
}

/// What to do when the event function grazes zero without a sign change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Graze {
    /// Report `TangencyUnresolved` (strict event location).
    Error,
    /// Skip the touch (hybrid semantics: a tangent touch is not a transition).
    Ignore,
}

/// A located zero crossing: time, state, and direction (+1 rising, -1 falling).
pub(crate) type Crossing = (f64, Vec2, i8);

/// Incremental sign-change scanner over dense segments.
///
/// Crossings only count once the event value has clearly left zero
/// ("arming"): a trajectory starting on the surface does not fire at t = 0.
pub(crate) struct CrossingScanner<'a> {
    event: &'a dyn Fn(Vec2) -> f64,
    value_tol: f64,
    time_tol: f64,
    graze: Graze,
    armed: bool,
    prev: (f64, f64),
    /// Flank sample preceding a run of below-tolerance values, if inside one.
    dip_start: Option<(f64, f64)>,
    /// Whether a pairwise sign change already fired inside the current dip.
    crossed_in_dip: bool,
    window: Vec<DenseSegment>,
}

impl<'a> CrossingScanner<'a> {
    pub fn new(
        event: &'a dyn Fn(Vec2) -> f64,
        settings: &IntegratorSettings,
        graze: Graze,
        t_start: f64,
        x_start: Vec2,
    ) -> Self {
        let e0 = event(x_start);
        CrossingScanner {
            event,
            value_tol: settings.event_value_tol,
            time_tol: settings.event_time_tol,
            graze,
            armed: e0.abs() > settings.event_value_tol,
            prev: (t_start, e0),
            dip_start: None,
            crossed_in_dip: false,
            window: Vec::new(),
        }
    }

    /// Evaluate the trajectory near the scan head, spanning a segment clip.
    fn eval_traj(&self, t: f64) -> Vec2 {
        for s in self.window.iter().rev() {
            if t >= s.win0 - 1e-15 {
                return s.eval(t);
            }
        }
        self.window.first().expect("scanner window empty").eval(t)
    }

    fn e_at(&self, t: f64) -> f64 {
        (self.event)(self.eval_traj(t))
    }

    /// Bisect a sign-change bracket to `time_tol` width.
    fn bisect(&self, mut a: f64, mut ea: f64, mut b: f64) -> Crossing {
        let dir: i8 = if ea < 0.0 { 1 } else { -1 };
        while b - a > self.time_tol {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let em = self.e_at(m);
            if em == 0.0 {
                a = m;
                b = m;
                break;
            }
            if (em < 0.0) == (ea < 0.0) {
                a = m;
                ea = em;
            } else {
                b = m;
            }
        }
        let t = 0.5 * (a + b);
        (t, self.eval_traj(t), dir)
    }

    /// Resolve a sampled dip to within `value_tol` of zero whose flanks share
    /// a sign: either two narrow crossings or a tangent touch.
    fn resolve_dip(
        &self,
        lo: f64,
        hi: f64,
        flank_sign: f64,
        out: &mut Vec<Crossing>,
    ) -> Result<()> {
        // Golden-section minimization of the flank-signed event value.
        let inv_phi = 0.618_033_988_749_894_9_f64;
        let obj = |t: f64| self.e_at(t) * flank_sign.signum();
        let (mut a, mut b) = (lo, hi);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (obj(c), obj(d));
        for _ in 0..200 {
            if b - a <= self.time_tol {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = obj(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = obj(d);
            }
        }
        let t_min = 0.5 * (a + b);
        let e_min = obj(t_min);
        if e_min < 0.0 {
            // The dip does cross: two transversal crossings around t_min.
            out.push(self.bisect_pair(lo, t_min));
            out.push(self.bisect_pair(t_min, hi));
            Ok(())
        } else if e_min.abs() <= self.value_tol {
            match self.graze {
                Graze::Error => Err(SolverError::TangencyUnresolved { t: t_min }),
                Graze::Ignore => Ok(()),
            }
        } else {
            Ok(())
        }
    }

    fn bisect_pair(&self, a: f64, b: f64) -> Crossing {
        let ea = self.e_at(a);
        self.bisect(a, ea, b)
    }

    fn advance(&mut self, t: f64, e: f64, out: &mut Vec<Crossing>) -> Result<()> {
        if !self.armed {
            if e.abs() > self.value_tol {
                self.armed = true;
            }
            self.prev = (t, e);
            return Ok(());
        }
        let (tp, ep) = self.prev;
        let below = e.abs() <= self.value_tol;
        let below_prev = ep.abs() <= self.value_tol;
        // Register dip entry before crossing detection so a crossing that
        // lands exactly on the entry pair is not re-found at dip exit.
        if below && !below_prev && self.dip_start.is_none() {
            self.dip_start = Some((tp, ep));
            self.crossed_in_dip = false;
        }
        if ep * e < 0.0 {
            out.push(self.bisect(tp, ep, t));
            if self.dip_start.is_some() {
                self.crossed_in_dip = true;
            }
        }
        if !below {
            if let Some((tq, eq)) = self.dip_start.take() {
                if !self.crossed_in_dip {
                    if eq * e > 0.0 {
                        // Same-sign flanks around a near-zero run: either a
                        // sub-sample double crossing or a tangent touch.
                        self.resolve_dip(tq, t, eq, out)?;
                    } else {
                        // Opposite flanks but no pairwise trigger (an exact
                        // zero sample defeats the sign product): bisect.
                        out.push(self.bisect(tq, eq, t));
                    }
                }
            }
        }
        self.prev = (t, e);
        Ok(())
    }

    /// Scan one newly produced segment; append crossings in time order.
    pub fn feed(&mut self, seg: &DenseSegment, out: &mut Vec<Crossing>) -> Result<()> {
        self.window.push(seg.clone());
        if self.window.len() > 2 {
            self.window.remove(0);
        }
        let (a, b) = (seg.win0, seg.win1);
        for k in 1..=EVENT_SUBSAMPLES {
            let t = a + (b - a) * (k as f64) / (EVENT_SUBSAMPLES as f64);
            let e = (self.event)(seg.eval(t));
            self.advance(t, e, out)?;
        }
        Ok(())
    }
}

/// Hairer-style initial step-size guess.
fn initial_step(f: &dyn VectorField, y: Vec2, settings: &IntegratorSettings, t_span: f64) -> f64 {
    let sc = |v: Vec2| {
        let s1 = settings.abs_tol + v.x1.abs() * settings.rel_tol;
        let s2 = settings.abs_tol + v.x2.abs() * settings.rel_tol;
        (s1, s2)
    };
    let rms = |v: Vec2, s: (f64, f64)| ((v.x1 / s.0).powi(2) + (v.x2 / s.1).powi(2)).sqrt()
        / std::f64::consts::SQRT_2;
    let f0 = f.eval(y);
    let s = sc(y);
    let d0 = rms(y, s);
    let d1 = rms(f0, s);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = y + h0 * f0;
    let f1 = f.eval(y1);
    let d2 = rms(f1 - f0, s) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(settings.max_step).min(t_span)
}

/// Core stepping loop. Calls `on_segment` after every accepted step; the
/// callback returns `false` to stop early.
fn integrate_with(
    f: &dyn VectorField,
    x0: Vec2,
    t_span: f64,
    settings: &IntegratorSettings,
    mut on_segment: impl FnMut(&DenseSegment) -> Result<bool>,
) -> Result<()> {
    settings.validate()?;
    if !x0.is_finite() || x0.max_abs() > STATE_BOUND {
        return Err(SolverError::NonFiniteState { t: 0.0, x1: x0.x1, x2: x0.x2 });
    }
    if t_span == 0.0 {
        return Ok(());
    }
    debug_assert!(t_span > 0.0);

    let mut t = 0.0_f64;
    let mut y = x0;
    let mut k1 = f.eval(y);
    let mut h = initial_step(f, y, settings, t_span);
    let mut just_rejected = false;

    loop {
        let last = t + h >= t_span;
        if last {
            h = t_span - t;
        }
        if h < MIN_STEP {
            // A vanishing remainder at the very end is the normal exit.
            if last && (t_span - t) < MIN_STEP {
                return Ok(());
            }
            return Err(SolverError::StepFailure { t, h });
        }

        let k2 = f.eval(y + h * (A21 * k1));
        let k3 = f.eval(y + h * (A31 * k1 + A32 * k2));
        let k4 = f.eval(y + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f.eval(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = f.eval(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);

        if !y_new.is_finite() || y_new.max_abs() > STATE_BOUND {
            h *= 0.5;
            just_rejected = true;
            if h < MIN_STEP {
                return Err(SolverError::NonFiniteState { t, x1: y_new.x1, x2: y_new.x2 });
            }
            continue;
        }

        let k7 = f.eval(y_new);
        let err_v = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let sk1 = settings.abs_tol + settings.rel_tol * y.x1.abs().max(y_new.x1.abs());
        let sk2 = settings.abs_tol + settings.rel_tol * y.x2.abs().max(y_new.x2.abs());
        let err = (((err_v.x1 / sk1).powi(2) + (err_v.x2 / sk2).powi(2)) / 2.0).sqrt();

        if err <= 1.0 {
            // Accept: build the quartic interpolant for this step.
            let ydiff = y_new - y;
            let bspl = h * k1 - ydiff;
            let cont = [
                y,
                ydiff,
                bspl,
                ydiff - h * k7 - bspl,
                h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
            ];
            let t_new = if last { t_span } else { t + h };
            let seg = DenseSegment {
                win0: t,
                win1: t_new,
                base_t: t,
                base_h: h,
                cont,
                x_begin: y,
                x_end: y_new,
            };
            if !on_segment(&seg)? {
                return Ok(());
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            if last {
                return Ok(());
            }
            let factor = if err <= f64::EPSILON {
                10.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, if just_rejected { 1.0 } else { 10.0 })
            };
            just_rejected = false;
            h = (h * factor).min(settings.max_step);
        } else {
            just_rejected = true;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
}

/// Endpoint of the flow of `f` from `x0` over duration `t` (either sign).
pub fn flow(f: &dyn VectorField, x0: Vec2, t: f64, settings: &IntegratorSettings) -> Result<Vec2> {
    if t == 0.0 {
        settings.validate()?;
        return Ok(x0);
    }
    let mut y = x0;
    if t > 0.0 {
        integrate_with(f, x0, t, settings, |seg| {
            y = seg.x_end;
            Ok(true)
        })?;
    } else {
        let neg = Negated(f);
        integrate_with(&neg, x0, -t, settings, |seg| {
            y = seg.x_end;
            Ok(true)
        })?;
    }
    Ok(y)
}

/// Dense trajectory of `f` from `x0` over `[0, t_span]` (`t_span >= 0`).
pub fn integrate_dense(
    f: &dyn VectorField,
    x0: Vec2,
    t_span: f64,
    settings: &IntegratorSettings,
) -> Result<DenseOutput> {
    if t_span < 0.0 {
        return Err(SolverError::Config(
            "integrate_dense requires a non-negative time span".into(),
        ));
    }
    let mut out = DenseOutput::empty();
    integrate_with(f, x0, t_span, settings, |seg| {
        out.push(seg.clone());
        Ok(true)
    })?;
    Ok(out)
}

/// Integrate until the first matching crossing of `event`, or until `t_max`.
///
/// Returns the dense trajectory clipped at the crossing (or covering the
/// whole span when none is found) together with the crossing, if any.
pub(crate) fn integrate_until(
    f: &dyn VectorField,
    x0: Vec2,
    event: &dyn Fn(Vec2) -> f64,
    direction: Direction,
    graze: Graze,
    t_max: f64,
    settings: &IntegratorSettings,
) -> Result<(DenseOutput, Option<Crossing>)> {
    let mut dense = DenseOutput::empty();
    let mut scanner = CrossingScanner::new(event, settings, graze, 0.0, x0);
    let mut hits: Vec<Crossing> = Vec::new();
    let mut found: Option<Crossing> = None;
    integrate_with(f, x0, t_max, settings, |seg| {
        dense.push(seg.clone());
        hits.clear();
        scanner.feed(seg, &mut hits)?;
        for &hit in hits.iter() {
            if direction.matches(hit.2) {
                found = Some(hit);
                return Ok(false);
            }
        }
        Ok(true)
    })?;
    if let Some((t_star, _, _)) = found {
        if t_star > dense.t0() {
            dense = dense.slice(dense.t0(), t_star)?;
        }
    }
    Ok((dense, found))
}

/// First crossing of `event` in the requested direction within `(0, t_max]`.
///
/// A start on the surface is permitted: crossings are sought only after the
/// event value has clearly left zero. A tangent graze raises
/// `TangencyUnresolved`.
pub fn locate_event(
    f: &dyn VectorField,
    x0: Vec2,
    event: &dyn Fn(Vec2) -> f64,
    direction: Direction,
    t_max: f64,
    settings: &IntegratorSettings,
) -> Result<Option<(f64, Vec2)>> {
    let (_, hit) = integrate_until(f, x0, event, direction, Graze::Error, t_max, settings)?;
    Ok(hit.map(|(t, x, _)| (t, x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: f64 = 9.81;

    fn ballistic() -> impl VectorField {
        |x: Vec2| Vec2::new(x.x2, -G)
    }

    fn settings() -> IntegratorSettings {
        IntegratorSettings::default()
    }

    #[test]
    fn flow_matches_ballistic_closed_form() {
        let f = ballistic();
        let x = flow(&f, Vec2::new(1.0, 0.0), 0.1, &settings()).unwrap();
        assert!((x.x1 - 0.95095).abs() < 1e-9, "x1 = {}", x.x1);
        assert!((x.x2 - (-0.981)).abs() < 1e-9, "x2 = {}", x.x2);
    }

    #[test]
    fn flow_zero_time_is_identity() {
        let f = ballistic();
        let x0 = Vec2::new(0.3, -1.2);
        assert_eq!(flow(&f, x0, 0.0, &settings()).unwrap(), x0);
    }

    #[test]
    fn flow_half_second_ballistic_profile() {
        // Closed form over a longer arc: x1 = 1 - g t^2 / 2, x2 = -g t.
        let f = ballistic();
        for &t in &[0.05, 0.2, 0.35, 0.5] {
            let x = flow(&f, Vec2::new(1.0, 0.0), t, &settings()).unwrap();
            assert!((x.x1 - (1.0 - 0.5 * G * t * t)).abs() < 1e-9);
            assert!((x.x2 - (-G * t)).abs() < 1e-9);
        }
    }

    #[test]
    fn dense_output_covers_and_interpolates() {
        let f = ballistic();
        let d = integrate_dense(&f, Vec2::new(1.0, 0.0), 0.2, &settings()).unwrap();
        assert_eq!(d.t0(), 0.0);
        assert_eq!(d.t1(), 0.2);
        for k in 0..=100 {
            let t = 0.2 * (k as f64) / 100.0;
            let x = d.eval(t);
            assert!((x.x1 - (1.0 - 0.5 * G * t * t)).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn dense_segments_are_continuous() {
        let f = |x: Vec2| Vec2::new(x.x2, 40000.0 / 0.65 * (0.25 - x.x1) - G);
        let d = integrate_dense(&f, Vec2::new(0.2458, 0.0), 0.01, &settings().with_max_step(1e-3))
            .unwrap();
        assert!(d.segments().len() > 1);
        for w in d.segments().windows(2) {
            assert_eq!(w[0].x1(), w[1].x0());
            assert_eq!(w[0].t1(), w[1].t0());
        }
        // Interpolant endpoints match stored endpoint states.
        for s in d.segments() {
            assert!((s.eval(s.t0()) - s.x0()).norm() <= 1e-12 * s.x0().norm().max(1.0));
            assert!((s.eval(s.t1()) - s.x1()).norm() <= 1e-12 * s.x1().norm().max(1.0));
        }
    }

    #[test]
    fn dense_zero_span_is_empty() {
        let f = ballistic();
        let d = integrate_dense(&f, Vec2::new(1.0, 0.0), 0.0, &settings()).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn locate_event_touchdown_matches_closed_form() {
        let f = ballistic();
        let event = |x: Vec2| x.x1 - 0.25;
        let hit = locate_event(&f, Vec2::new(0.3, 0.0), &event, Direction::Falling, 1.0, &settings())
            .unwrap()
            .expect("touchdown expected");
        let t_exact = (2.0 * 0.05 / G).sqrt();
        assert!((hit.0 - t_exact).abs() < 1e-9, "t = {}", hit.0);
        assert!((hit.1.x1 - 0.25).abs() < 1e-9);
        assert!((hit.1.x2 - (-G * t_exact)).abs() < 1e-8);
    }

    #[test]
    fn locate_event_none_when_no_crossing() {
        let f = ballistic();
        let event = |x: Vec2| x.x1 - 10.0;
        let hit =
            locate_event(&f, Vec2::new(0.3, 0.0), &event, Direction::Any, 0.5, &settings()).unwrap();
        assert!(hit.is_none());
    }

    #[test]
    fn locate_event_arms_after_leaving_surface() {
        // Start exactly on the surface moving away; the first strictly
        // positive crossing is the fall back through it.
        let f = ballistic();
        let event = |x: Vec2| x.x1 - 0.25;
        let hit = locate_event(
            &f,
            Vec2::new(0.25, 1.0),
            &event,
            Direction::Any,
            1.0,
            &settings(),
        )
        .unwrap()
        .expect("return crossing expected");
        let t_exact = 2.0 / G;
        assert!((hit.0 - t_exact).abs() < 1e-9, "t = {}", hit.0);
        assert!(hit.1.x2 < 0.0);
    }

    #[test]
    fn locate_event_never_armed_returns_none() {
        let f = |_: Vec2| Vec2::ZERO;
        let event = |x: Vec2| x.x1;
        let hit =
            locate_event(&f, Vec2::new(0.0, 0.0), &event, Direction::Any, 0.1, &settings()).unwrap();
        assert!(hit.is_none());
    }

    #[test]
    fn tangent_graze_is_an_error_under_strict_location() {
        // Apex passes within 1e-12 below the surface: a genuine graze.
        let f = ballistic();
        let v0 = 1.0_f64;
        let apex = v0 * v0 / (2.0 * G);
        let event = move |x: Vec2| x.x1 - (apex + 1e-12);
        let r = locate_event(
            &f,
            Vec2::new(0.0, v0),
            &event,
            Direction::Any,
            0.3,
            &settings().with_max_step(1e-5),
        );
        match r {
            Err(SolverError::TangencyUnresolved { .. }) => {}
            other => panic!("expected TangencyUnresolved, got {other:?}"),
        }
    }

    #[test]
    fn tangent_graze_ignored_in_lenient_mode() {
        let f = ballistic();
        let v0 = 1.0_f64;
        let apex = v0 * v0 / (2.0 * G);
        let event = move |x: Vec2| x.x1 - (apex + 1e-12);
        let s = settings().with_max_step(1e-5);
        let (_, hit) =
            integrate_until(&f, Vec2::new(0.0, v0), &event, Direction::Any, Graze::Ignore, 0.3, &s)
                .unwrap();
        assert!(hit.is_none());
    }

    #[test]
    fn narrow_double_crossing_is_found() {
        // Apex pokes 1e-10 above the surface: two closely spaced crossings.
        let f = ballistic();
        let v0 = 1.0_f64;
        let apex = v0 * v0 / (2.0 * G);
        let event = move |x: Vec2| x.x1 - (apex - 1e-10);
        let s = settings().with_max_step(1e-5);
        let hit = locate_event(&f, Vec2::new(0.0, v0), &event, Direction::Rising, 0.3, &s)
            .unwrap()
            .expect("rising crossing expected");
        let t_apex = v0 / G;
        assert!(hit.0 < t_apex && hit.0 > t_apex - 2e-5, "t = {}", hit.0);
    }

    #[test]
    fn semigroup_property() {
        let f = |x: Vec2| Vec2::new(x.x2, 40000.0 / 0.65 * (0.25 - x.x1) - 15.0 * x.x2 - G);
        let s = settings().with_max_step(1e-3);
        let x0 = Vec2::new(0.2497, 0.1);
        let a = flow(&f, flow(&f, x0, 0.004, &s).unwrap(), 0.003, &s).unwrap();
        let b = flow(&f, x0, 0.007, &s).unwrap();
        assert!((a - b).norm() < 1e-8, "gap = {}", (a - b).norm());
    }

    #[test]
    fn reverse_flow_returns_to_start() {
        let f = |x: Vec2| Vec2::new(x.x2, 40000.0 / 0.65 * (0.25 - x.x1) - 15.0 * x.x2 - G);
        let s = settings().with_max_step(1e-3);
        let x0 = Vec2::new(0.2497, 0.1);
        let fwd = flow(&f, x0, 0.006, &s).unwrap();
        let back = flow(&f, fwd, -0.006, &s).unwrap();
        assert!((back - x0).norm() < 1e-8, "gap = {}", (back - x0).norm());
    }

    #[test]
    fn tighter_tolerances_reduce_error() {
        let f = ballistic();
        let x0 = Vec2::new(1.0, 0.0);
        let exact = Vec2::new(1.0 - 0.5 * G * 0.25, -G * 0.5);
        let loose = IntegratorSettings {
            rel_tol: 1e-6,
            abs_tol: 1e-8,
            ..IntegratorSettings::default()
        };
        let tight = IntegratorSettings {
            rel_tol: 5e-7,
            abs_tol: 5e-9,
            ..IntegratorSettings::default()
        };
        let e_loose = (flow(&f, x0, 0.5, &loose).unwrap() - exact).norm();
        let e_tight = (flow(&f, x0, 0.5, &tight).unwrap() - exact).norm();
        assert!(e_tight <= e_loose.max(1e-13));
    }

    #[test]
    fn divergence_is_reported() {
        let f = |x: Vec2| Vec2::new(x.x2, 1e4 * x.x1.abs().max(1.0) * x.x1);
        let r = flow(&f, Vec2::new(1.0, 1.0), 10.0, &settings());
        match r {
            Err(SolverError::NonFiniteState { .. }) => {}
            other => panic!("expected NonFiniteState, got {other:?}"),
        }
    }

    #[test]
    fn slice_and_shift_dense_output() {
        let f = ballistic();
        let d = integrate_dense(&f, Vec2::new(1.0, 0.0), 0.2, &settings()).unwrap();
        let s = d.slice(0.05, 0.15).unwrap();
        assert!((s.t0() - 0.05).abs() < 1e-15);
        assert!((s.t1() - 0.15).abs() < 1e-15);
        assert!((s.start() - d.eval(0.05)).norm() < 1e-12);
        assert!((s.end() - d.eval(0.15)).norm() < 1e-12);
        let sh = s.shifted(1.0);
        assert!((sh.t0() - 1.05).abs() < 1e-15);
        assert!((sh.eval(1.1) - d.eval(0.1)).norm() < 1e-12);
        assert!(d.slice(-0.5, 0.1).is_err());
        assert!(d.slice(0.1, 0.3).is_err());
    }

    #[test]
    fn settings_validation() {
        let mut s = settings();
        s.rel_tol = 0.0;
        assert!(s.validate().is_err());
        let mut s = settings();
        s.event_time_tol = 1.0;
        assert!(s.validate().is_err());
        assert!(settings().validate().is_ok());
    }
}
