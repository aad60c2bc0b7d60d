//! Panel planning and fixed-step RK4 kernels for `(u', u)' = [[0, w], [1, 0]] (u', u)`
//! with `w(x) = V(x, ωx) − E`.
//!
//! A plan splits an interval at every crossing of a breakpoint by `ωx` (and by
//! `ωx + δ` for shifted systems), so each panel sees a single smooth branch of
//! the potential. Shifts below [`SLIVER_RATIO`] are not split; their jumps are
//! replaced by impulses carrying the exact sliver integral.

use crate::error::{Error, Result};
use crate::potential::{Piece, PotentialSpec};

/// Hard cap on enumerated panel boundaries per plan.
pub(crate) const MAX_EVENTS: usize = 20_000_000;

/// Shifts with `|δ/ω|` below this are treated as slivers.
pub(crate) const SLIVER_RATIO: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub(crate) struct PlanOptions {
    /// Split at breakpoint crossings and table cells.
    pub align: bool,
    /// Also split where `|V(x, ωx) − V(x, ωx + δ)|` has a kink.
    pub kinks: bool,
    /// Split at integers (the renormalization cadence).
    pub unit_marks: bool,
}

impl PlanOptions {
    pub(crate) fn transfer(align: bool) -> Self {
        PlanOptions {
            align,
            kinks: false,
            unit_marks: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Panel {
    pub a: f64,
    pub b: f64,
    base1: f64,
    piece1: Piece,
    piece2: Piece,
    aligned: bool,
}

impl Panel {
    fn new(spec: &PotentialSpec, omega: f64, shift: f64, a: f64, b: f64, aligned: bool) -> Self {
        let mid = 0.5 * (a + b);
        let y1 = omega * mid;
        let base1 = y1.floor();
        Panel {
            a,
            b,
            base1,
            piece1: spec.locate(mid, y1),
            piece2: spec.locate(mid, y1 + shift),
            aligned,
        }
    }

    /// `V(x, ωx)` on this panel's branch.
    #[inline]
    pub fn potential(&self, spec: &PotentialSpec, omega: f64, x: f64) -> f64 {
        if self.aligned {
            spec.eval_piece(x, omega * x - self.base1, self.piece1)
        } else {
            spec.value(x, omega * x)
        }
    }

    /// `V(x, ωx) − V(x, ωx + δ)`.
    #[inline]
    pub fn drift(&self, spec: &PotentialSpec, omega: f64, shift: f64, x: f64) -> f64 {
        if shift == 0.0 {
            0.0
        } else if self.aligned {
            -spec.shifted_difference(x, omega * x - self.base1, shift, self.piece1, self.piece2)
        } else {
            spec.value(x, omega * x) - spec.value(x, omega * x + shift)
        }
    }

    /// Step nodes in the direction of travel. With `grading > 1` the nodes
    /// cluster at both panel ends; for `even` the steps come in equal pairs.
    fn nodes(&self, h: f64, forward: bool, even: bool, grading: i32) -> impl Iterator<Item = f64> + '_ {
        let len = self.b - self.a;
        let mut n = ((len / h).ceil() as usize).max(1);
        if grading > 1 {
            n = (2 * n).max(MIN_GRADED_STEPS);
        }
        if even && n % 2 == 1 {
            n += 1;
        }
        let (a, b) = (self.a, self.b);
        let pairs = even && grading > 1;
        let major = if pairs { n / 2 } else { n };
        let at = move |m: usize| grade(m as f64 / major as f64, grading).0;
        (0..=n).map(move |k| {
            if k == n {
                return if forward { b } else { a };
            }
            let t = if !pairs {
                at(k)
            } else if k % 2 == 0 {
                at(k / 2)
            } else {
                0.5 * (at(k / 2) + at(k / 2 + 1))
            };
            if forward {
                a + len * t
            } else {
                b - len * t
            }
        })
    }
}

/// Minimum steps on a graded panel, so short panels still resolve the cusp.
const MIN_GRADED_STEPS: usize = 8;

/// Endpoint-clustering map `s ↦ s^k / (s^k + (1-s)^k)` on [0, 1] and its
/// derivative. Used where a Hölder cusp sits at a panel end.
pub(crate) fn grade(s: f64, k: i32) -> (f64, f64) {
    if k <= 1 {
        return (s, 1.0);
    }
    let a = s.powi(k);
    let b = (1.0 - s).powi(k);
    let d = a + b;
    let da = k as f64 * s.powi(k - 1);
    let db = -(k as f64) * (1.0 - s).powi(k - 1);
    (a / d, (da * d - a * (da + db)) / (d * d))
}

/// Grading exponent for the integrator: `k(1 + γ) > 4` keeps fourth order
/// against a `|y|^γ` coefficient.
pub(crate) fn ode_grading(gamma: f64) -> i32 {
    if gamma < 1.0 {
        (4.0 / (1.0 + gamma)).floor() as i32 + 1
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Segment {
    Panel(Panel),
    /// A sliver of width `|δ|/ω` around a jump, collapsed to a point.
    /// `dw_integral` is `∫ (V(x, ωx) − V(x, ωx + δ)) dx` over the sliver.
    Impulse {
        #[allow(dead_code)]
        at: f64,
        dw_integral: f64,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub segments: Vec<Segment>,
    pub forward: bool,
}

impl Plan {
    #[cfg(test)]
    pub fn panel_count(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s, Segment::Panel(_)))
            .count()
    }

    /// `±1` for the orientation of integrals taken along the plan.
    pub fn orientation(&self) -> f64 {
        if self.forward {
            1.0
        } else {
            -1.0
        }
    }
}

fn crossings(out: &mut Vec<f64>, slope: f64, offset: f64, ys: &[f64], lo: f64, hi: f64) -> Result<()> {
    for &y in ys {
        let estimate = ((hi - lo) * slope) as usize + 2;
        if out.len() + estimate > MAX_EVENTS {
            return Err(Error::Scale(format!(
                "breakpoint enumeration on [{lo}, {hi}] exceeds {MAX_EVENTS} events"
            )));
        }
        let mut k = (slope * lo + offset - y).floor();
        loop {
            let t = (y - offset + k) / slope;
            if t >= hi {
                break;
            }
            if t > lo {
                out.push(t);
            }
            k += 1.0;
        }
    }
    Ok(())
}

/// Splits the path from `from` to `to` into panels on which both `V(x, ωx)`
/// and `V(x, ωx + shift)` follow a single branch.
pub(crate) fn plan(
    spec: &PotentialSpec,
    omega: f64,
    from: f64,
    to: f64,
    shift: f64,
    opts: PlanOptions,
) -> Result<Plan> {
    if !(omega > 0.0) {
        return Err(Error::Precondition(format!("frequency must be positive, got {omega}")));
    }
    let forward = from <= to;
    let (lo, hi) = if forward { (from, to) } else { (to, from) };
    let mut events = Vec::new();
    let mut impulses: Vec<(f64, f64)> = Vec::new();

    if opts.unit_marks {
        let mut k = lo.floor() + 1.0;
        while k < hi {
            events.push(k);
            k += 1.0;
        }
    }
    if opts.align {
        let bps = &spec.breakpoints()[..spec.breakpoints().len() - 1];
        let sliver = shift != 0.0 && (shift / omega).abs() < SLIVER_RATIO;
        crossings(&mut events, omega, 0.0, bps, lo, hi)?;
        if shift != 0.0 && !sliver {
            crossings(&mut events, omega, shift, bps, lo, hi)?;
        }
        if let Some(xb) = spec.x_breakpoints() {
            crossings(&mut events, 1.0, 0.0, &xb, lo, hi)?;
        }
        if opts.kinks {
            crossings(&mut events, omega, 0.0, &spec.kink_points(shift), lo, hi)?;
        }
        if sliver {
            for (i, &b) in bps.iter().enumerate() {
                let jump = spec.jump(i);
                if jump == 0.0 {
                    continue;
                }
                let mut at = Vec::new();
                crossings(&mut at, omega, 0.0, &[b], lo, hi)?;
                impulses.extend(at.into_iter().map(|x| (x, -jump * shift / omega)));
            }
            impulses.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
    }
    events.sort_by(f64::total_cmp);
    events.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * (1.0 + b.abs()));

    let mut segments = Vec::with_capacity(events.len() + impulses.len() + 1);
    let mut pending = impulses.into_iter().peekable();
    let mut a = lo;
    for b in events.into_iter().chain(std::iter::once(hi)) {
        if b > a {
            segments.push(Segment::Panel(Panel::new(spec, omega, shift, a, b, opts.align)));
            a = b;
        }
        while let Some(&(x, integral)) = pending.peek() {
            if x > a + 1e-12 * (1.0 + a.abs()) {
                break;
            }
            segments.push(Segment::Impulse {
                at: x,
                dw_integral: integral,
            });
            pending.next();
        }
    }
    if !forward {
        segments.reverse();
    }
    Ok(Plan { segments, forward })
}

#[inline]
fn rhs(w: f64, v: [f64; 2]) -> [f64; 2] {
    [w * v[1], v[0]]
}

/// One classical RK4 step of `v' = [[0, w], [1, 0]] v`.
#[inline]
pub(crate) fn rk4(v: [f64; 2], w0: f64, wm: f64, w1: f64, s: f64) -> [f64; 2] {
    let hs = 0.5 * s;
    let k1 = rhs(w0, v);
    let k2 = rhs(wm, [v[0] + hs * k1[0], v[1] + hs * k1[1]]);
    let k3 = rhs(wm, [v[0] + hs * k2[0], v[1] + hs * k2[1]]);
    let k4 = rhs(w1, [v[0] + s * k3[0], v[1] + s * k3[1]]);
    [
        v[0] + s / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        v[1] + s / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Row-major `[m00, m01, m10, m11]` times `v`.
#[inline]
pub(crate) fn mat_vec(m: &[f64; 4], v: [f64; 2]) -> [f64; 2] {
    [m[0] * v[0] + m[1] * v[1], m[2] * v[0] + m[3] * v[1]]
}

#[inline]
pub(crate) fn mat_mul(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

#[inline]
fn step_matrix(w0: f64, wm: f64, w1: f64, s: f64) -> [f64; 4] {
    let c0 = rk4([1.0, 0.0], w0, wm, w1, s);
    let c1 = rk4([0.0, 1.0], w0, wm, w1, s);
    [c0[0], c1[0], c0[1], c1[1]]
}

/// Shared data for evaluating `w = V − E` along a plan.
#[derive(Clone, Copy)]
pub(crate) struct Field<'a> {
    pub spec: &'a PotentialSpec,
    pub omega: f64,
    pub energy: f64,
    pub shift: f64,
    pub h: f64,
}

impl Field<'_> {
    #[inline]
    fn w(&self, panel: &Panel, x: f64) -> f64 {
        panel.potential(self.spec, self.omega, x) - self.energy
    }

    /// `(w₁, Δw)` with `w₂ = w₁ − Δw`.
    #[inline]
    fn w_pair(&self, panel: &Panel, x: f64) -> (f64, f64) {
        (
            self.w(panel, x),
            panel.drift(self.spec, self.omega, self.shift, x),
        )
    }

    /// Transfer matrix of one panel in the direction of travel.
    pub fn panel_matrix(&self, panel: &Panel, forward: bool) -> [f64; 4] {
        let mut c0 = [1.0, 0.0];
        let mut c1 = [0.0, 1.0];
        let mut nodes = panel.nodes(self.h, forward, false, ode_grading(self.spec.gamma()));
        let mut x0 = nodes.next().unwrap_or(panel.a);
        let mut w0 = self.w(panel, x0);
        for x1 in nodes {
            let s = x1 - x0;
            let wm = self.w(panel, x0 + 0.5 * s);
            let w1 = self.w(panel, x1);
            c0 = rk4(c0, w0, wm, w1, s);
            c1 = rk4(c1, w0, wm, w1, s);
            x0 = x1;
            w0 = w1;
        }
        [c0[0], c1[0], c0[1], c1[1]]
    }

    /// Propagates one vector across a panel.
    pub fn panel_vector(&self, panel: &Panel, forward: bool, mut v: [f64; 2]) -> [f64; 2] {
        let mut nodes = panel.nodes(self.h, forward, false, ode_grading(self.spec.gamma()));
        let mut x0 = nodes.next().unwrap_or(panel.a);
        let mut w0 = self.w(panel, x0);
        for x1 in nodes {
            let s = x1 - x0;
            let wm = self.w(panel, x0 + 0.5 * s);
            let w1 = self.w(panel, x1);
            v = rk4(v, w0, wm, w1, s);
            x0 = x1;
            w0 = w1;
        }
        v
    }

    /// RK4 on the coupled system `Y' = A₁Y + (A₁ − A₂)Z`, `Z' = A₂Z`, whose `Y`
    /// component is the difference of the two flows applied to `Z(start)`.
    pub fn panel_difference(&self, panel: &Panel, forward: bool, states: &mut [Pair]) {
        let mut nodes = panel.nodes(self.h, forward, false, ode_grading(self.spec.gamma()));
        let mut x0 = nodes.next().unwrap_or(panel.a);
        let mut c0 = self.w_pair(panel, x0);
        for x1 in nodes {
            let s = x1 - x0;
            let cm = self.w_pair(panel, x0 + 0.5 * s);
            let c1 = self.w_pair(panel, x1);
            for st in states.iter_mut() {
                *st = st.rk4(c0, cm, c1, s);
            }
            x0 = x1;
            c0 = c1;
        }
    }

    /// Variation of constants: accumulates `∫ T₁(t → x) F(t) dt` with
    /// `F = (Δw·u₂, 0)` by composite Simpson over pairs of RK4 steps, the
    /// kernel `T₁(t → x)` being the product of RK4 step matrices.
    pub fn panel_voc(&self, panel: &Panel, forward: bool, st: &mut VocState) {
        let nodes: Vec<f64> = panel.nodes(self.h, forward, true, ode_grading(self.spec.gamma())).collect();
        let (mut w0, mut d0) = self.w_pair(panel, nodes[0]);
        for pair in nodes.windows(3).step_by(2) {
            let (x0, x1, x2) = (pair[0], pair[1], pair[2]);
            let (s1, s2) = (x1 - x0, x2 - x1);
            let (wa, da) = self.w_pair(panel, x0 + 0.5 * s1);
            let (w1, d1) = self.w_pair(panel, x1);
            let (wb, db) = self.w_pair(panel, x1 + 0.5 * s2);
            let (w2, d2) = self.w_pair(panel, x2);

            let m1 = step_matrix(w0, wa, w1, s1);
            let m2 = step_matrix(w1, wb, w2, s2);
            let m21 = mat_mul(&m2, &m1);

            let z0 = st.z;
            let z1 = rk4(z0, w0 - d0, wa - da, w1 - d1, s1);
            let z2 = rk4(z1, w1 - d1, wb - db, w2 - d2, s2);
            let f0 = [d0 * z0[1], 0.0];
            let f1 = [d1 * z1[1], 0.0];
            let f2 = [d2 * z2[1], 0.0];

            let carried = mat_vec(&m21, st.acc);
            let g0 = mat_vec(&m21, f0);
            let g1 = mat_vec(&m2, f1);
            let third = (s1 + s2) / 6.0;
            st.acc = [
                carried[0] + third * (g0[0] + 4.0 * g1[0] + f2[0]),
                carried[1] + third * (g0[1] + 4.0 * g1[1] + f2[1]),
            ];
            st.z = z2;
            w0 = w2;
            d0 = d2;
        }
    }
}

/// State of the coupled difference system.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Pair {
    pub y: [f64; 2],
    pub z: [f64; 2],
}

impl Pair {
    #[inline]
    fn rhs(&self, (w1, dw): (f64, f64)) -> Pair {
        Pair {
            y: [w1 * self.y[1] + dw * self.z[1], self.y[0]],
            z: [(w1 - dw) * self.z[1], self.z[0]],
        }
    }

    #[inline]
    fn axpy(&self, s: f64, k: &Pair) -> Pair {
        Pair {
            y: [self.y[0] + s * k.y[0], self.y[1] + s * k.y[1]],
            z: [self.z[0] + s * k.z[0], self.z[1] + s * k.z[1]],
        }
    }

    #[inline]
    fn rk4(&self, c0: (f64, f64), cm: (f64, f64), c1: (f64, f64), s: f64) -> Pair {
        let k1 = self.rhs(c0);
        let k2 = self.axpy(0.5 * s, &k1).rhs(cm);
        let k3 = self.axpy(0.5 * s, &k2).rhs(cm);
        let k4 = self.axpy(s, &k3).rhs(c1);
        let mut out = *self;
        for i in 0..2 {
            out.y[i] += s / 6.0 * (k1.y[i] + 2.0 * k2.y[i] + 2.0 * k3.y[i] + k4.y[i]);
            out.z[i] += s / 6.0 * (k1.z[i] + 2.0 * k2.z[i] + 2.0 * k3.z[i] + k4.z[i]);
        }
        out
    }

    #[inline]
    pub fn impulse(&mut self, signed_integral: f64) {
        self.y[0] += signed_integral * self.z[1];
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct VocState {
    pub acc: [f64; 2],
    pub z: [f64; 2],
}

impl VocState {
    #[inline]
    pub fn impulse(&mut self, signed_integral: f64) {
        self.acc[0] += signed_integral * self.z[1];
    }
}

/// Runs the coupled difference system along `from → to`.
pub(crate) fn difference_flow(field: &Field<'_>, from: f64, to: f64, states: &mut [Pair]) -> Result<()> {
    let plan = plan(field.spec, field.omega, from, to, field.shift, PlanOptions::transfer(true))?;
    let sign = plan.orientation();
    for seg in &plan.segments {
        match seg {
            Segment::Panel(p) => field.panel_difference(p, plan.forward, states),
            Segment::Impulse { dw_integral, .. } => {
                for st in states.iter_mut() {
                    st.impulse(sign * dw_integral);
                }
            }
        }
    }
    Ok(())
}

/// Runs the variation-of-constants quadrature along `from → to`.
pub(crate) fn voc_flow(field: &Field<'_>, from: f64, to: f64, st: &mut VocState) -> Result<()> {
    let plan = plan(field.spec, field.omega, from, to, field.shift, PlanOptions::transfer(true))?;
    let sign = plan.orientation();
    for seg in &plan.segments {
        match seg {
            Segment::Panel(p) => field.panel_voc(p, plan.forward, st),
            Segment::Impulse { dw_integral, .. } => st.impulse(sign * dw_integral),
        }
    }
    Ok(())
}
