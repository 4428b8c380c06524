//! Two-mode hybrid automaton semantics: exact and transition-delayed
//! simulation, and the trajectory algebra (slice / join / surface queries).
//!
//! Both modes share one switching surface {g = 0} and identity resets: mode 1
//! lives in {g <= 0}, mode 2 in {g >= 0}. A delayed run lets the state keep
//! evolving under the pre-transition field for the delay window before the
//! mode actually switches; a pending switch is committed unconditionally even
//! if the state re-crosses the surface during the window.

use crate::error::{Result, SolverError};
use crate::ode::{
    integrate_dense, integrate_until, CrossingScanner, DenseOutput, Direction, Graze,
    IntegratorSettings, VectorField,
};
use crate::vec2::Vec2;

/// Which of the two vector fields currently governs the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    One,
    Two,
}

impl Mode {
    pub fn index(self) -> usize {
        match self {
            Mode::One => 1,
            Mode::Two => 2,
        }
    }

    pub fn other(self) -> Mode {
        match self {
            Mode::One => Mode::Two,
            Mode::Two => Mode::One,
        }
    }

    pub fn from_index(i: usize) -> Result<Mode> {
        match i {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            _ => Err(SolverError::Config(format!("mode must be 1 or 2, got {i}"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Axis-aligned sanity bounds for a model's state space.
#[derive(Debug, Clone, Copy)]
pub struct DomainBox {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
}

impl DomainBox {
    pub fn contains(&self, x: Vec2) -> bool {
        x.x1 >= self.x1.0 && x.x1 <= self.x1.1 && x.x2 >= self.x2.0 && x.x2 <= self.x2.1
    }
}

/// A planar two-mode hybrid system with one guard surface and identity resets.
pub struct BimodalAutomaton {
    pub name: String,
    pub f1: Box<dyn VectorField + Send + Sync>,
    pub f2: Box<dyn VectorField + Send + Sync>,
    pub guard: Box<dyn Fn(Vec2) -> f64 + Send + Sync>,
    pub guard_grad: Box<dyn Fn(Vec2) -> Vec2 + Send + Sync>,
    pub equilibrium: Vec2,
    pub domain_box: DomainBox,
    /// Step caps per mode: the contact mode is much stiffer than free fall.
    pub max_step: [f64; 2],
    /// Parameter interval of the section worth scanning for this model.
    pub suggested_section_range: (f64, f64),
}

impl BimodalAutomaton {
    pub fn field(&self, mode: Mode) -> &dyn VectorField {
        match mode {
            Mode::One => self.f1.as_ref(),
            Mode::Two => self.f2.as_ref(),
        }
    }

    /// Integrator settings specialized to a mode's stiffness.
    pub fn mode_settings(&self, mode: Mode, base: &IntegratorSettings) -> IntegratorSettings {
        base.with_max_step(self.max_step[mode.index() - 1])
    }

    /// Directional guard derivative along a mode's field.
    pub fn guard_rate(&self, mode: Mode, x: Vec2) -> f64 {
        (self.guard_grad)(x).dot(self.field(mode).eval(x))
    }

    /// Structural sanity: the equilibrium sits strictly inside mode 1's
    /// domain and is a rest point of f1.
    pub fn validate(&self) -> Result<()> {
        let xs = self.equilibrium;
        if (self.guard)(xs) >= 0.0 {
            return Err(SolverError::Config(
                "equilibrium must lie strictly inside the mode-1 domain".into(),
            ));
        }
        let fx = self.f1.eval(xs);
        if fx.x1.abs() > 1e-10 || fx.x2.abs() > 1e-10 {
            return Err(SolverError::Config(format!(
                "equilibrium is not a rest point of f1: f1(x*) = ({}, {})",
                fx.x1, fx.x2
            )));
        }
        Ok(())
    }
}

/// How transition firing relates to guard-crossing detection.
///
/// `Fixed(H)` delays every entry into mode 1 (surface crossing detected while
/// in mode 2) by exactly H and leaves mode-1 exits exact — the configuration
/// in which a too-large sensing delay visibly destroys contraction.
/// `Schedule` gives full per-transition control: the k-th transition of the
/// run (chronological, zero-based) fires its crossing plus the k-th entry;
/// missing entries mean zero.
#[derive(Debug, Clone, PartialEq)]
pub enum DelayPolicy {
    Exact,
    Fixed(f64),
    Schedule(Vec<f64>),
}

impl DelayPolicy {
    fn delay_for(&self, k: usize, from: Mode) -> f64 {
        match self {
            DelayPolicy::Exact => 0.0,
            DelayPolicy::Fixed(h) => match from {
                Mode::Two => *h,
                Mode::One => 0.0,
            },
            DelayPolicy::Schedule(hs) => hs.get(k).copied().unwrap_or(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            DelayPolicy::Exact => true,
            DelayPolicy::Fixed(h) => h.is_finite() && *h >= 0.0,
            DelayPolicy::Schedule(hs) => hs.iter().all(|h| h.is_finite() && *h >= 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(SolverError::Config("delays must be finite and non-negative".into()))
        }
    }
}

/// One recorded mode switch.
#[derive(Debug, Clone, Copy)]
pub struct Transition {
    /// Firing time (crossing time + applied delay).
    pub t: f64,
    pub from: Mode,
    pub to: Mode,
    /// Delay applied on top of the detected crossing.
    pub delay: f64,
}

/// A simulated run: contiguous per-mode dense pieces plus the switch log.
#[derive(Default)]
pub struct HybridTrajectory {
    pieces: Vec<(Mode, DenseOutput)>,
    transitions: Vec<Transition>,
}

impl HybridTrajectory {
    pub fn empty() -> Self {
        HybridTrajectory::default()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn pieces(&self) -> &[(Mode, DenseOutput)] {
        &self.pieces
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn t0(&self) -> f64 {
        self.pieces.first().map_or(0.0, |(_, d)| d.t0())
    }

    pub fn t1(&self) -> f64 {
        self.pieces.last().map_or(0.0, |(_, d)| d.t1())
    }

    pub fn start(&self) -> (Mode, Vec2) {
        let (m, d) = self.pieces.first().expect("empty trajectory");
        (*m, d.start())
    }

    pub fn end(&self) -> (Mode, Vec2) {
        let (m, d) = self.pieces.last().expect("empty trajectory");
        (*m, d.end())
    }

    /// Mode and state at time `t` (clamped to the span). At a transition
    /// instant the post-switch mode is reported.
    pub fn eval(&self, t: f64) -> (Mode, Vec2) {
        assert!(!self.pieces.is_empty(), "eval on empty trajectory");
        let t = t.clamp(self.t0(), self.t1());
        let idx = self
            .pieces
            .partition_point(|(_, d)| d.t1() <= t)
            .min(self.pieces.len() - 1);
        let (m, d) = &self.pieces[idx];
        (*m, d.eval(t))
    }

    /// Restriction to `[t_lo, t_hi]`; transition records inside the window
    /// are retained.
    pub fn slice(&self, t_lo: f64, t_hi: f64) -> Result<HybridTrajectory> {
        let (a, b) = (self.t0(), self.t1());
        let pad = 1e-12;
        if !(t_lo < t_hi) || t_lo < a - pad || t_hi > b + pad {
            return Err(SolverError::Range(format!(
                "slice window [{t_lo}, {t_hi}] outside trajectory span [{a}, {b}]"
            )));
        }
        let t_lo = t_lo.max(a);
        let t_hi = t_hi.min(b);
        let mut pieces = Vec::new();
        for (m, d) in &self.pieces {
            if d.t1() <= t_lo || d.t0() >= t_hi {
                continue;
            }
            let w0 = d.t0().max(t_lo);
            let w1 = d.t1().min(t_hi);
            if w1 - w0 <= 0.0 {
                continue;
            }
            pieces.push((*m, d.slice(w0, w1)?));
        }
        let transitions = self
            .transitions
            .iter()
            .filter(|tr| tr.t > t_lo && tr.t <= t_hi)
            .copied()
            .collect();
        Ok(HybridTrajectory { pieces, transitions })
    }

    /// Uniform samples `(mode, t, x)` at spacing `dt` (final instant always
    /// included).
    pub fn sample(&self, dt: f64) -> Vec<(Mode, f64, Vec2)> {
        assert!(dt > 0.0, "sample spacing must be positive");
        let (a, b) = (self.t0(), self.t1());
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let t = a + dt * k as f64;
            if t >= b {
                break;
            }
            let (m, x) = self.eval(t);
            out.push((m, t, x));
            k += 1;
        }
        let (m, x) = self.eval(b);
        out.push((m, b, x));
        out
    }

    pub(crate) fn push_piece(&mut self, mode: Mode, dense: DenseOutput) {
        if dense.is_empty() {
            return;
        }
        if let Some((m, last)) = self.pieces.last_mut() {
            if *m == mode {
                // Extend the current same-mode piece seamlessly.
                for seg in dense.segments() {
                    last.push_internal(seg.clone());
                }
                return;
            }
        }
        self.pieces.push((mode, dense));
    }

    pub(crate) fn push_transition(&mut self, tr: Transition) {
        self.transitions.push(tr);
    }
}

/// Time-shifted concatenation: `b` is translated so it starts where `a` ends.
pub fn join(a: &HybridTrajectory, b: &HybridTrajectory) -> Result<HybridTrajectory> {
    if a.is_empty() {
        return Ok(HybridTrajectory {
            pieces: b.pieces.clone(),
            transitions: b.transitions.clone(),
        });
    }
    if b.is_empty() {
        return Ok(HybridTrajectory {
            pieces: a.pieces.clone(),
            transitions: a.transitions.clone(),
        });
    }
    let (mode_a, xa) = a.end();
    let (mode_b, xb) = b.start();
    if xa.dist(xb) > 1e-9 {
        return Err(SolverError::Mismatch(format!(
            "cannot join: endpoint ({}, {}) vs start ({}, {})",
            xa.x1, xa.x2, xb.x1, xb.x2
        )));
    }
    let dt = a.t1() - b.t0();
    let mut out = HybridTrajectory {
        pieces: a.pieces.clone(),
        transitions: a.transitions.clone(),
    };
    if mode_a != mode_b {
        // Differing modes are connected by a legal zero-delay switch.
        out.transitions.push(Transition { t: a.t1(), from: mode_a, to: mode_b, delay: 0.0 });
    }
    for (m, d) in &b.pieces {
        out.push_piece(*m, d.shifted(dt));
    }
    for tr in &b.transitions {
        out.transitions.push(Transition { t: tr.t + dt, ..*tr });
    }
    out.transitions
        .sort_by(|p, q| p.t.partial_cmp(&q.t).expect("finite transition times"));
    Ok(out)
}

/// Abort threshold: more transitions than this suggests chattering.
const MAX_TRANSITIONS: usize = 100_000;

/// Simulate the automaton from `(q0, x0)` over `[0, T]` under a delay policy.
///
/// Mode-q dynamics integrate f_q even while the delayed state is outside
/// Dom(q); a pending switch commits unconditionally at crossing + delay.
/// Switches scheduled beyond `T` never fire (and are not recorded).
pub fn simulate(
    a: &BimodalAutomaton,
    q0: Mode,
    x0: Vec2,
    t_span: f64,
    policy: &DelayPolicy,
    settings: &IntegratorSettings,
) -> Result<HybridTrajectory> {
    settings.validate()?;
    policy.validate()?;
    if t_span <= 0.0 {
        return Err(SolverError::Config("simulation horizon must be positive".into()));
    }
    let g0 = (a.guard)(x0);
    let inside = match q0 {
        Mode::One => g0 <= settings.event_value_tol,
        Mode::Two => g0 >= -settings.event_value_tol,
    };
    if !inside {
        return Err(SolverError::PreconditionViolated(format!(
            "x0 = ({}, {}) is not in the domain of mode {q0} (guard value {g0})",
            x0.x1, x0.x2
        )));
    }

    let mut traj = HybridTrajectory::empty();
    let mut q = q0;
    let mut x = x0;
    let mut t_abs = 0.0_f64;
    let mut k = 0usize; // transition counter
    let mut last_fire = f64::NEG_INFINITY;

    while t_abs < t_span {
        let remaining = t_span - t_abs;
        let mode_settings = a.mode_settings(q, settings);
        let dir = match q {
            Mode::One => Direction::Rising,
            Mode::Two => Direction::Falling,
        };
        let (dense, hit) = integrate_until(
            a.field(q),
            x,
            &|p| (a.guard)(p),
            dir,
            Graze::Ignore,
            remaining,
            &mode_settings,
        )?;
        match hit {
            None => {
                traj.push_piece(q, dense.shifted(t_abs));
                t_abs = t_span;
            }
            Some((tc, xc, _)) => {
                let delay = policy.delay_for(k, q);
                let fire_rel = tc + delay;
                let mut piece = dense; // covers [0, tc]
                if fire_rel >= remaining {
                    // The switch would fire beyond the horizon: keep flowing
                    // in the current mode to T and stop.
                    let tail =
                        integrate_dense(a.field(q), xc, remaining - tc, &mode_settings)?;
                    for seg in tail.shifted(tc).segments() {
                        piece.push_internal(seg.clone());
                    }
                    traj.push_piece(q, piece.shifted(t_abs));
                    t_abs = t_span;
                    continue;
                }
                let x_fire = if delay > 0.0 {
                    let tail = integrate_dense(a.field(q), xc, delay, &mode_settings)?;
                    let end = tail.end();
                    for seg in tail.shifted(tc).segments() {
                        piece.push_internal(seg.clone());
                    }
                    end
                } else {
                    xc
                };
                traj.push_piece(q, piece.shifted(t_abs));
                let t_fire = t_abs + fire_rel;
                traj.transitions.push(Transition { t: t_fire, from: q, to: q.other(), delay });
                k += 1;
                if k > MAX_TRANSITIONS {
                    return Err(SolverError::ZenoSuspected { t: t_fire, count: k });
                }
                if t_fire - last_fire < settings.event_time_tol {
                    return Err(SolverError::ZenoSuspected { t: t_fire, count: k });
                }
                last_fire = t_fire;
                q = q.other();
                x = x_fire;
                t_abs = t_fire;
            }
        }
    }
    Ok(traj)
}

/// All crossings of `{surface = 0}` along the trajectory strictly after
/// `after`, in time order. Tangent touches are skipped.
pub fn spatial_hits(
    traj: &HybridTrajectory,
    surface: &dyn Fn(Vec2) -> f64,
    after: f64,
    settings: &IntegratorSettings,
) -> Result<Vec<(Mode, f64, Vec2)>> {
    if traj.is_empty() || after >= traj.t1() {
        return Ok(Vec::new());
    }
    let t_seed = after.max(traj.t0());
    let (_, x_seed) = traj.eval(t_seed);
    let mut scanner = CrossingScanner::new(surface, settings, Graze::Ignore, t_seed, x_seed);
    let mut hits = Vec::new();
    for (_, dense) in traj.pieces() {
        for seg in dense.segments() {
            if seg.t1() <= t_seed {
                continue;
            }
            let seg = if seg.t0() < t_seed {
                dense.slice(t_seed, seg.t1())?.segments()[0].clone()
            } else {
                seg.clone()
            };
            scanner.feed(&seg, &mut hits)?;
        }
    }
    Ok(hits
        .into_iter()
        .filter(|(t, _, _)| *t > after)
        .map(|(t, x, _)| {
            let (m, _) = traj.eval(t);
            (m, t, x)
        })
        .collect())
}

/// Check that every recorded transition fired within `h_max` of its crossing.
pub fn validate_max_delay(traj: &HybridTrajectory, h_max: f64) -> bool {
    traj.transitions().iter().all(|tr| tr.delay <= h_max + 1e-15)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn settings() -> IntegratorSettings {
        IntegratorSettings::default()
    }

    fn ball() -> BimodalAutomaton {
        models::bouncing_ball(models::nonlinear_defaults())
    }

    #[test]
    fn exact_run_settles_toward_equilibrium() {
        let a = ball();
        let traj = simulate(
            &a,
            Mode::Two,
            Vec2::new(1.0, 0.0),
            12.0,
            &DelayPolicy::Exact,
            &settings(),
        )
        .unwrap();
        let (_, x_end) = traj.end();
        assert!(
            x_end.dist(a.equilibrium) < 1e-3,
            "terminal distance {}",
            x_end.dist(a.equilibrium)
        );
        assert!(traj.transitions().len() > 50);
    }

    #[test]
    fn exact_transitions_lie_on_the_guard() {
        let a = ball();
        let traj = simulate(
            &a,
            Mode::Two,
            Vec2::new(1.0, 0.0),
            2.0,
            &DelayPolicy::Exact,
            &settings(),
        )
        .unwrap();
        assert!(!traj.transitions().is_empty());
        for tr in traj.transitions() {
            let (_, x) = traj.eval(tr.t);
            assert!(
                (a.guard)(x).abs() <= settings().event_value_tol,
                "guard residual {} at t = {}",
                (a.guard)(x),
                tr.t
            );
            assert_eq!(tr.delay, 0.0);
        }
    }

    #[test]
    fn zero_delay_matches_exact() {
        let a = ball();
        let x0 = Vec2::new(1.0, 0.0);
        let te = simulate(&a, Mode::Two, x0, 2.0, &DelayPolicy::Exact, &settings()).unwrap();
        let tf = simulate(&a, Mode::Two, x0, 2.0, &DelayPolicy::Fixed(0.0), &settings()).unwrap();
        assert_eq!(te.transitions().len(), tf.transitions().len());
        for (p, q) in te.transitions().iter().zip(tf.transitions()) {
            assert!((p.t - q.t).abs() <= settings().event_time_tol);
        }
    }

    #[test]
    fn state_is_continuous_across_transitions() {
        let a = ball();
        let traj = simulate(
            &a,
            Mode::Two,
            Vec2::new(1.0, 0.0),
            2.0,
            &DelayPolicy::Fixed(0.002),
            &settings(),
        )
        .unwrap();
        for w in traj.pieces().windows(2) {
            let gap = w[0].1.end().dist(w[1].1.start());
            assert!(gap <= 1e-12, "reset discontinuity {gap}");
        }
        // Modes alternate.
        for w in traj.pieces().windows(2) {
            assert_ne!(w[0].0, w[1].0);
        }
    }

    #[test]
    fn delayed_transitions_fire_at_crossing_plus_h() {
        let a = ball();
        let h = 0.002;
        let traj = simulate(
            &a,
            Mode::Two,
            Vec2::new(1.0, 0.0),
            2.0,
            &DelayPolicy::Fixed(h),
            &settings(),
        )
        .unwrap();
        let mut saw_delayed = false;
        for tr in traj.transitions() {
            match tr.from {
                Mode::Two => {
                    assert!((tr.delay - h).abs() < 1e-15);
                    saw_delayed = true;
                    // At firing, the state has penetrated past the surface.
                    let (_, x) = traj.eval(tr.t);
                    assert!((a.guard)(x) < 0.0);
                }
                Mode::One => assert_eq!(tr.delay, 0.0),
            }
        }
        assert!(saw_delayed);
        assert!(validate_max_delay(&traj, h));
        assert!(!validate_max_delay(&traj, h / 2.0));
    }

    #[test]
    fn schedule_entries_apply_per_transition() {
        let a = ball();
        let sched = DelayPolicy::Schedule(vec![0.001, 0.0005, 0.002]);
        let traj = simulate(&a, Mode::Two, Vec2::new(1.0, 0.0), 2.0, &sched, &settings()).unwrap();
        let tr = traj.transitions();
        assert!(tr.len() >= 4);
        assert!((tr[0].delay - 0.001).abs() < 1e-15);
        assert!((tr[1].delay - 0.0005).abs() < 1e-15);
        assert!((tr[2].delay - 0.002).abs() < 1e-15);
        // Missing entries mean zero.
        assert_eq!(tr[3].delay, 0.0);
    }

    #[test]
    fn wrong_mode_start_is_rejected() {
        let a = ball();
        let r = simulate(
            &a,
            Mode::One,
            Vec2::new(1.0, 0.0),
            1.0,
            &DelayPolicy::Exact,
            &settings(),
        );
        assert!(matches!(r, Err(SolverError::PreconditionViolated(_))));
    }

    #[test]
    fn chattering_is_aborted() {
        // Opposing constant fields around the surface with a delay produce a
        // bounded-period switching storm.
        let a = BimodalAutomaton {
            name: "chatter".into(),
            f1: Box::new(|_: Vec2| Vec2::new(1.0, 0.0)),
            f2: Box::new(|_: Vec2| Vec2::new(-1.0, 0.0)),
            guard: Box::new(|x: Vec2| x.x1),
            guard_grad: Box::new(|_: Vec2| Vec2::new(1.0, 0.0)),
            equilibrium: Vec2::new(-1.0, 0.0),
            domain_box: DomainBox { x1: (-2.0, 2.0), x2: (-1.0, 1.0) },
            max_step: [1e-2, 1e-2],
            suggested_section_range: (-1.0, 0.0),
        };
        let r = simulate(
            &a,
            Mode::Two,
            Vec2::new(0.5, 0.0),
            30.0,
            &DelayPolicy::Schedule(vec![1e-4; 200_000]),
            &settings(),
        );
        match r {
            Err(SolverError::ZenoSuspected { count, .. }) => assert!(count > MAX_TRANSITIONS),
            other => panic!("expected ZenoSuspected, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn slice_full_window_is_identity() {
        let a = ball();
        let traj = simulate(
            &a,
            Mode::Two,
            Vec2::new(1.0, 0.0),
            1.5,
            &DelayPolicy::Exact,
            &settings(),
        )
        .unwrap();
        let s = traj.slice(traj.t0(), traj.t1()).unwrap();
        assert_eq!(s.transitions().len(), traj.transitions().len());
        for k in 0..=50 {
            let t = 1.5 * k as f64 / 50.0;
            assert!((s.eval(t).1 - traj.eval(t).1).norm() < 1e-12);
        }
    }

    #[test]
    fn nested_slices_compose() {
        let a = ball();
        let traj = simulate(
            &a,
            Mode::Two,
            Vec2::new(1.0, 0.0),
            1.5,
            &DelayPolicy::Exact,
            &settings(),
        )
        .unwrap();
        let outer = traj.slice(0.2, 1.4).unwrap();
        let nested = outer.slice(0.5, 1.0).unwrap();
        let direct = traj.slice(0.5, 1.0).unwrap();
        assert_eq!(nested.transitions().len(), direct.transitions().len());
        for k in 0..=50 {
            let t = 0.5 + 0.5 * k as f64 / 50.0;
            assert!((nested.eval(t).1 - direct.eval(t).1).norm() < 1e-12);
        }
    }

    #[test]
    fn slice_retains_transition_records() {
        let a = ball();
        let traj = simulate(
            &a,
            Mode::Two,
            Vec2::new(1.0, 0.0),
            1.5,
            &DelayPolicy::Fixed(0.002),
            &settings(),
        )
        .unwrap();
        let tr0 = traj.transitions()[0];
        let s = traj.slice(tr0.t - 0.008, tr0.t + 0.008).unwrap();
        assert_eq!(s.transitions().len(), 1);
        assert!((s.transitions()[0].t - tr0.t).abs() < 1e-15);
        assert!((s.transitions()[0].delay - tr0.delay).abs() < 1e-15);
        assert!(traj.slice(-1.0, 0.5).is_err());
        assert!(traj.slice(0.5, 99.0).is_err());
    }

    #[test]
    fn join_identity_and_reconcatenation() {
        let a = ball();
        let traj = simulate(
            &a,
            Mode::Two,
            Vec2::new(1.0, 0.0),
            1.5,
            &DelayPolicy::Exact,
            &settings(),
        )
        .unwrap();
        let j = join(&traj, &HybridTrajectory::empty()).unwrap();
        assert_eq!(j.transitions().len(), traj.transitions().len());

        let left = traj.slice(0.0, 0.7).unwrap();
        let right = traj.slice(0.7, 1.5).unwrap();
        let glued = join(&left, &right).unwrap();
        for k in 0..=50 {
            let t = 1.5 * k as f64 / 50.0;
            assert!(
                (glued.eval(t).1 - traj.eval(t).1).norm() < 1e-9,
                "mismatch at t = {t}"
            );
        }
    }

    #[test]
    fn join_rejects_mismatched_endpoints() {
        let a = ball();
        let t1 = simulate(&a, Mode::Two, Vec2::new(1.0, 0.0), 0.2, &DelayPolicy::Exact, &settings())
            .unwrap();
        let t2 = simulate(&a, Mode::Two, Vec2::new(0.9, 0.0), 0.2, &DelayPolicy::Exact, &settings())
            .unwrap();
        assert!(matches!(join(&t1, &t2), Err(SolverError::Mismatch(_))));
    }

    #[test]
    fn guard_hits_alternate_directions() {
        let a = ball();
        let traj = simulate(
            &a,
            Mode::Two,
            Vec2::new(1.0, 0.0),
            2.0,
            &DelayPolicy::Exact,
            &settings(),
        )
        .unwrap();
        let hits = spatial_hits(&traj, &|x| (a.guard)(x), 0.0, &settings()).unwrap();
        assert!(hits.len() >= 4);
        // Touchdowns (falling) and liftoffs (rising) alternate; velocities
        // alternate in sign accordingly.
        for (k, (_, _, x)) in hits.iter().enumerate() {
            if k % 2 == 0 {
                assert!(x.x2 < 0.0, "hit {k} should be falling");
            } else {
                assert!(x.x2 > 0.0, "hit {k} should be rising");
            }
        }
    }

    #[test]
    fn velocity_surface_hit_at_max_compression() {
        let a = ball();
        let traj = simulate(
            &a,
            Mode::Two,
            Vec2::new(1.0, 0.0),
            2.0,
            &DelayPolicy::Exact,
            &settings(),
        )
        .unwrap();
        let hits = spatial_hits(&traj, &|x: Vec2| x.x2, 0.0, &settings()).unwrap();
        let contact = hits
            .iter()
            .find(|(m, _, _)| *m == Mode::One)
            .expect("expected a compression turning point");
        assert!(contact.2.x1 < 0.25, "turning point should be below the surface");
        assert!(contact.2.x2.abs() <= settings().event_value_tol);
    }

    #[test]
    fn spatial_hits_empty_after_span() {
        let a = ball();
        let traj = simulate(
            &a,
            Mode::Two,
            Vec2::new(1.0, 0.0),
            1.0,
            &DelayPolicy::Exact,
            &settings(),
        )
        .unwrap();
        let hits = spatial_hits(&traj, &|x| (a.guard)(x), 1.0, &settings()).unwrap();
        assert!(hits.is_empty());
    }
}
