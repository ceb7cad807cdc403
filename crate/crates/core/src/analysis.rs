//! Non-archimedean root finding and mapping theory: Hensel lifting, Newton
//! polygons, root counting on spheres, digit-by-digit root isolation, ball
//! images and map degree.
//!
//! The sphere solver cannot rely on plain Hensel lifting: the family's
//! preimage equations have derivative divisible by p, so it expands roots
//! digit by digit from graded residue equations and only switches to the
//! Newton iteration once a branch has separated. Digit candidates are
//! always tried in the residue field's canonical enumeration order, making
//! every root choice reproducible.

use crate::error::{Error, Result};
use crate::padic::{Context, Elem, FqElem, Rat, UltraBall, Valuation};
use crate::series::Series;
use num_bigint::BigInt;
use num_traits::Zero;

/// A lower-hull segment; `root_val` is the valuation of the roots it
/// accounts for (the negated geometric slope), `length` their number with
/// multiplicity. Segments are ordered left to right, so `root_val` strictly
/// decreases.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub root_val: Rat,
    pub length: u64,
}

#[derive(Clone, Debug)]
pub struct NewtonPolygon {
    /// Lower convex hull of (i, v(a_i)), left to right.
    pub vertices: Vec<(u64, Rat)>,
    pub segments: Vec<Segment>,
    /// Multiplicity of the root z = 0 (the index of the lowest listed
    /// coefficient).
    pub zero_roots: u64,
}

impl NewtonPolygon {
    /// Number of roots with valuation >= bound (counting z = 0).
    pub fn count_roots_with_val_at_least(&self, bound: &Rat) -> u64 {
        self.zero_roots
            + self
                .segments
                .iter()
                .filter(|s| &s.root_val >= bound)
                .map(|s| s.length)
                .sum::<u64>()
    }
}

/// Lower convex hull of the exact coefficient valuations.
///
/// Coefficients whose valuation is not decidable at the working precision
/// are tolerated only strictly above the hull; a certified tail must also
/// stay strictly above it.
pub fn newton_polygon(f: &Series) -> Result<NewtonPolygon> {
    let mut exact: Vec<(u64, Rat)> = Vec::new();
    let mut fuzzy: Vec<(u64, Rat)> = Vec::new();
    for (&i, c) in f.coeffs() {
        match c.valuation() {
            Ok(Valuation::Infinite) => continue,
            Ok(Valuation::Finite(v)) => exact.push((i, v)),
            Err(_) => fuzzy.push((i, c.context().pi_to_val(c.prec_pi()))),
        }
    }
    exact.sort_by_key(|&(i, _)| i);
    if exact.is_empty() {
        if fuzzy.is_empty() && f.tail.is_none() {
            return Ok(NewtonPolygon {
                vertices: Vec::new(),
                segments: Vec::new(),
                zero_roots: 0,
            });
        }
        return Err(Error::PrecisionLoss(
            "no coefficient has a decidable valuation".into(),
        ));
    }
    // monotone chain for the lower hull
    let mut hull: Vec<(u64, Rat)> = Vec::new();
    for (i, v) in &exact {
        while hull.len() >= 2 {
            let (x1, y1) = &hull[hull.len() - 2];
            let (x2, y2) = &hull[hull.len() - 1];
            // keep if (x2,y2) is strictly below the chord (x1,y1)-(i,v)
            let lhs = (y2 - y1) * Rat::from(BigInt::from(*i - *x1));
            let rhs = (v - y1) * Rat::from(BigInt::from(*x2 - *x1));
            if lhs < rhs {
                break;
            }
            hull.pop();
        }
        hull.push((*i, v.clone()));
    }
    let hull_value = |i: u64| -> Option<Rat> {
        let (first, last) = (hull.first().unwrap(), hull.last().unwrap());
        if i < first.0 || i > last.0 {
            return None;
        }
        for w in hull.windows(2) {
            let (x1, y1) = &w[0];
            let (x2, y2) = &w[1];
            if i >= *x1 && i <= *x2 {
                let t = Rat::new(BigInt::from(i - x1), BigInt::from(x2 - x1));
                return Some(y1 + t * (y2 - y1));
            }
        }
        Some(last.1.clone())
    };
    for (i, bound) in &fuzzy {
        match hull_value(*i) {
            Some(h) => {
                if bound <= &h {
                    return Err(Error::PrecisionLoss(format!(
                        "coefficient {i} undecided at a level on or below the hull"
                    )));
                }
            }
            None => {
                return Err(Error::PrecisionLoss(format!(
                    "coefficient {i} undecided outside the listed hull span"
                )))
            }
        }
    }
    if let Some(t) = &f.tail {
        // the tail must stay strictly above the hull and eventually rise
        let last = hull.last().unwrap();
        let last_slope = if hull.len() >= 2 {
            let (x1, y1) = &hull[hull.len() - 2];
            (&last.1 - y1) * Rat::new(BigInt::from(1), BigInt::from(last.0 - x1))
        } else {
            Rat::zero()
        };
        if t.slope <= last_slope {
            return Err(Error::TailDominates(
                "tail slope does not rise above the final hull slope".into(),
            ));
        }
        let start = t.from_index.max(last.0 + 1);
        let bound0 = &t.base
            + &t.slope * Rat::from(BigInt::from(start) - BigInt::from(t.from_index));
        let extrapolated = &last.1 + &last_slope * Rat::from(BigInt::from(start - last.0));
        if bound0 <= extrapolated {
            return Err(Error::TailDominates(
                "tail bound reaches the extrapolated hull".into(),
            ));
        }
    }
    let zero_roots = hull.first().unwrap().0;
    let mut segments = Vec::new();
    for w in hull.windows(2) {
        let (x1, y1) = &w[0];
        let (x2, y2) = &w[1];
        segments.push(Segment {
            root_val: (y1 - y2) * Rat::new(BigInt::from(1), BigInt::from(x2 - x1)),
            length: x2 - x1,
        });
    }
    Ok(NewtonPolygon {
        vertices: hull,
        segments,
        zero_roots,
    })
}

/// Exact number of roots with |root| = p^{-r_v}, counting multiplicity,
/// from the extremal indices of the Gauss norm.
pub fn count_roots_on_sphere(f: &Series, r_v: &Rat) -> Result<u64> {
    if f.tail.is_some() && *r_v < f.domain_radius_val {
        return Err(Error::AdmissionFailed(
            "sphere radius outside the certified domain".into(),
        ));
    }
    let (_, witnesses) = f.norm_exponent_from(0, r_v)?;
    if witnesses.len() <= 1 {
        return Ok(0);
    }
    Ok(witnesses.iter().max().unwrap() - witnesses.iter().min().unwrap())
}

#[derive(Clone, Debug)]
pub struct HenselOutcome {
    pub root: Elem,
    /// v(f(z_n)) along the iteration.
    pub residual_trace: Vec<Rat>,
    /// v(f'(z_n)) along the iteration.
    pub deriv_trace: Vec<Rat>,
}

/// Certified Newton iteration: requires |f(z0)| < |f'(z0)|^2 with integral
/// coefficients and |z0| <= 1, and converges quadratically to the unique
/// root w with |w - z0| <= |f(z0)|/|f'(z0)|.
pub fn hensel_lift(f: &Series, z0: &Elem) -> Result<HenselOutcome> {
    let ctx = f.context().clone();
    for (&i, c) in f.coeffs() {
        if ctx.pi_to_val(c.vlow_pi()) < Rat::zero() {
            return Err(Error::AdmissionFailed(format!(
                "coefficient {i} is not integral"
            )));
        }
    }
    if let Some(t) = &f.tail {
        if t.base < Rat::zero() || t.slope < Rat::zero() {
            return Err(Error::AdmissionFailed("tail is not integral".into()));
        }
    }
    if ctx.pi_to_val(z0.vlow_pi()) < Rat::zero() {
        return Err(Error::AdmissionFailed("z0 is not integral".into()));
    }
    let df = f.derivative();
    let fz = f.eval(z0)?;
    let dfz = df.eval(z0)?;
    let vd = match dfz.valuation()? {
        Valuation::Infinite => {
            return Err(Error::HenselPreconditionFailed {
                fz0: "finite".into(),
                dfz0_twice: "infinite".into(),
            })
        }
        Valuation::Finite(v) => v,
    };
    let twice = &vd + &vd;
    let vf = match fz.valuation() {
        Ok(Valuation::Infinite) => None,
        Ok(Valuation::Finite(v)) => Some(v),
        // residual already indistinguishable from zero: fine if the window
        // is deep enough
        Err(_) => {
            let bound = ctx.pi_to_val(fz.prec_pi());
            if bound > twice {
                None
            } else {
                return Err(Error::PrecisionLoss(
                    "f(z0) undecided at the precondition level".into(),
                ));
            }
        }
    };
    if let Some(vf) = &vf {
        if *vf <= twice {
            return Err(Error::HenselPreconditionFailed {
                fz0: vf.to_string(),
                dfz0_twice: twice.to_string(),
            });
        }
    }
    let mut z = z0.working();
    let mut residual_trace = Vec::new();
    let mut deriv_trace = Vec::new();
    if let Some(v) = vf {
        residual_trace.push(v);
    }
    deriv_trace.push(vd.clone());
    for _ in 0..64 {
        let fz = f.eval(&z)?;
        if fz.is_zero_at_prec() {
            break;
        }
        let dfz = df.eval(&z)?;
        let step = fz.div(&dfz)?;
        z = z.sub(&step);
        let fz2 = f.eval(&z)?;
        match fz2.valuation() {
            Ok(Valuation::Finite(v)) => {
                residual_trace.push(v.clone());
                deriv_trace.push(match df.eval(&z)?.valuation()? {
                    Valuation::Finite(v) => v,
                    Valuation::Infinite => unreachable!("derivative vanished"),
                });
            }
            _ => break,
        }
    }
    // the root is pinned to |w - z_n| <= |f(z_n)|/|f'|
    let fz = f.eval(&z)?;
    let root = match fz.valuation() {
        Ok(Valuation::Finite(v)) => {
            let prec = ctx.val_to_pi(&crate::series::floor_to_grid(&(&v - &vd), ctx.e()))?;
            z.demoted(prec)
        }
        _ => z,
    };
    Ok(HenselOutcome {
        root,
        residual_trace,
        deriv_trace,
    })
}

#[derive(Clone, Debug)]
pub struct SphereRoot {
    pub point: Elem,
    /// Valuation of f(point) - target actually achieved.
    pub residual_val: Valuation,
    /// True when the residual reached the requested goal.
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct SphereRoots {
    /// Root count from the Newton polygon: the count in the algebraic
    /// closure. The number of roots found below can be smaller; the
    /// difference is the K-representability gap and is surfaced, not
    /// hidden.
    pub polygon_count: u64,
    pub roots: Vec<SphereRoot>,
    /// Some branch died on a residue equation with no root in F_{p^f}.
    pub residue_obstruction: bool,
}

struct SphereSolver<'a> {
    ctx: Context,
    g: &'a Series,
    goal_pi: i64,
    depth_cap_pi: i64,
    count_limit: usize,
    roots: Vec<SphereRoot>,
    residue_obstruction: bool,
}

impl<'a> SphereSolver<'a> {
    fn emit(&mut self, stem: &Elem) -> Result<()> {
        let resid = self.g.eval(stem)?;
        let (rv, converged) = match resid.valuation() {
            Ok(Valuation::Infinite) => (Valuation::Infinite, true),
            Ok(Valuation::Finite(v)) => {
                let ok = self.ctx.val_to_pi(&crate::series::floor_to_grid(&v, self.ctx.e()))?
                    >= self.goal_pi;
                (Valuation::Finite(v), ok)
            }
            Err(_) => (
                Valuation::Finite(self.ctx.pi_to_val(resid.prec_pi())),
                resid.prec_pi() >= self.goal_pi,
            ),
        };
        self.roots.push(SphereRoot {
            point: stem.clone(),
            residual_val: rv,
            converged,
        });
        Ok(())
    }

    /// Expand roots of h (= g recentered at `stem`) whose valuation lies
    /// strictly beyond the last placed digit position `last_pi`; at the
    /// sphere level the valuation must equal `last_pi` exactly.
    fn descend(&mut self, h: &Series, last_pi: i64, stem: &Elem, exact_first: bool) -> Result<()> {
        if self.roots.len() >= self.count_limit {
            return Ok(());
        }
        let r0 = h.coeff(0);
        // residual already good (or undecidable): emit the stem itself,
        // except at the sphere level where no digit has been placed yet
        if !exact_first {
            let deep_enough = match r0.valuation() {
                Ok(Valuation::Infinite) => true,
                Ok(Valuation::Finite(v)) => {
                    self.ctx.val_to_pi(&crate::series::floor_to_grid(&v, self.ctx.e()))?
                        >= self.goal_pi
                }
                Err(_) => true,
            };
            if deep_enough || last_pi > self.depth_cap_pi {
                return self.emit(stem);
            }
        }
        let polygon = newton_polygon(h)?;
        let t_rat = self.ctx.pi_to_val(last_pi);
        let wanted = |seg: &Segment| {
            if exact_first {
                seg.root_val == t_rat
            } else {
                // continuation digits sit strictly beyond the placed one;
                // fractional-position segments are real roots outside the
                // digit grid of K and fail the integrality filter below
                seg.root_val > t_rat
            }
        };
        // walk segments left to right (root_val decreasing)
        let mut alive = false;
        let mut remaining: u64 = polygon
            .segments
            .iter()
            .filter(|s| wanted(s))
            .map(|s| s.length)
            .sum();
        for seg in &polygon.segments {
            if self.roots.len() >= self.count_limit {
                return Ok(());
            }
            if !wanted(seg) {
                continue;
            }
            let s_pi = match self.ctx.val_to_pi(&seg.root_val) {
                Ok(s) => s,
                // a segment whose slope leaves the value group of K:
                // its roots are not K-representable
                Err(_) => continue,
            };
            // graded residue equation from the extremal indices at s
            let (_, extremal) = h.norm_exponent_from(0, &seg.root_val)?;
            let fq = self.ctx.fq().clone();
            let mut graded: Vec<(u64, FqElem)> = Vec::new();
            for i in &extremal {
                let (_, lead) = h.coeff(*i).leading_digit()?;
                graded.push((*i, lead));
            }
            let imin = *extremal.iter().min().unwrap();
            let mut any_root = false;
            for u in fq.elements().skip(1) {
                if self.roots.len() >= self.count_limit {
                    return Ok(());
                }
                let mut acc = FqElem::ZERO;
                for (i, lead) in &graded {
                    let term = fq.mul(lead, &fq.pow(&u, i - imin));
                    acc = fq.add(&acc, &term);
                }
                if !acc.is_zero() {
                    continue;
                }
                any_root = true;
                alive = true;
                let digit = Elem::digit_monomial(&self.ctx, s_pi, &u);
                let stem2 = stem.add(&digit);
                let h2 = h.recenter(&digit)?;
                // branch separated: a unique remaining root under the
                // certified Newton precondition finishes quadratically
                if remaining == 1 {
                    if let (Ok(Valuation::Finite(v0)), Ok(Valuation::Finite(v1))) =
                        (h2.coeff(0).valuation(), h2.coeff(1).valuation())
                    {
                        if v0 > &v1 + &v1 {
                            let y = newton_refine(&h2)?;
                            let total = stem2.add(&y);
                            self.emit(&total)?;
                            continue;
                        }
                    }
                }
                self.descend(&h2, s_pi, &stem2, false)?;
            }
            if !any_root && !graded.is_empty() {
                self.residue_obstruction = true;
            }
            remaining = remaining.saturating_sub(seg.length);
        }
        if !alive && !exact_first {
            // every branch died here: surface the best stem achieved
            return self.emit(stem);
        }
        Ok(())
    }
}

/// Newton iteration on a series from the origin, precondition checked by
/// the caller.
fn newton_refine(h: &Series) -> Result<Elem> {
    let dh = h.derivative();
    let mut z = Elem::zero(h.context());
    for _ in 0..64 {
        let hz = h.eval(&z)?;
        if hz.is_zero_at_prec() {
            break;
        }
        let dz = dh.eval(&z)?;
        z = z.sub(&hz.div(&dz)?);
    }
    Ok(z)
}

/// Find points x with |x| = p^{-r_v} and |f(x) - target| <= p^{-goal},
/// expanding residue digits in the canonical order. Roots that stall
/// before the goal (a K-representability gap) are returned unconverged
/// with the residual they achieved.
pub fn solve_on_sphere(
    f: &Series,
    target: &Elem,
    r_v: &Rat,
    count_limit: usize,
    residual_goal: Option<Rat>,
) -> Result<SphereRoots> {
    let ctx = f.context().clone();
    let g = f.sub_const(target);
    let polygon_count = count_roots_on_sphere(&g, r_v)?;
    if polygon_count == 0 {
        return Err(Error::NoRootAtRadius(r_v.clone()));
    }
    let t0 = ctx.val_to_pi(r_v)?;
    let goal_pi = match residual_goal {
        Some(v) => ctx.val_to_pi(&crate::series::floor_to_grid(&v, ctx.e()))?,
        None => ctx.precision() / 2,
    };
    let mut solver = SphereSolver {
        ctx: ctx.clone(),
        g: &g,
        goal_pi,
        depth_cap_pi: t0 + ctx.precision(),
        count_limit,
        roots: Vec::new(),
        residue_obstruction: false,
    };
    solver.descend(&g, t0, &Elem::zero(&ctx), true)?;
    if solver.roots.is_empty() && solver.residue_obstruction {
        return Err(Error::ResidueFieldTooSmall {
            f: ctx.f() as u64,
        });
    }
    Ok(SphereRoots {
        polygon_count,
        roots: solver.roots,
        residue_obstruction: solver.residue_obstruction,
    })
}

/// The exact image of a ball under a series (spec operation; delegates to
/// the series machinery).
pub fn image_ball(f: &Series, ball: &UltraBall) -> Result<UltraBall> {
    f.image_ball(ball)
}

/// Radius exponent of the image ball, for certificate ledgers.
pub fn image_diameter_bound(f: &Series, ball: &UltraBall) -> Result<Valuation> {
    f.image_diameter_bound(ball)
}

/// Degree of the map f on the closed ball B: the number of f = w solutions
/// in B for w in f(B), computed from the Newton polygon at a probe on the
/// image boundary sphere.
pub fn map_degree(f: &Series, ball: &UltraBall) -> Result<u64> {
    let ctx = f.context().clone();
    let r_v = match ball.effective_closed_val() {
        Valuation::Infinite => {
            return Err(Error::AdmissionFailed("degree on a point ball".into()))
        }
        Valuation::Finite(v) => v,
    };
    let center = ball.center.clone();
    let shifted = f.recenter(&center)?;
    let (image_radius, _) = shifted.norm_exponent_from(1, &r_v)?;
    let g = match image_radius {
        Valuation::Infinite => return Ok(0),
        Valuation::Finite(g) => g,
    };
    // probe target on the boundary sphere of the image ball
    let probe = f
        .eval(&center)?
        .add(&Elem::uniformizer_pow(&ctx, ctx.val_to_pi(&g)?));
    let poly = newton_polygon(&shifted.sub_const(&probe))?;
    // count roots of f(center + t) = probe with v(t) >= r_v
    Ok(poly.count_roots_with_val_at_least(&r_v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{rat, rat_int};
    use crate::series::p_family_series;

    #[test]
    fn hensel_sqrt_minus_one() {
        // f = z^2 + 1 over p=5 from z0 = 2; oracle: brute force mod 5^4
        let mut oracle = Vec::new();
        for z in 0..625u64 {
            if (z * z + 1) % 625 == 0 && z % 5 == 2 {
                oracle.push(z);
            }
        }
        assert_eq!(oracle, vec![182]); // 182 = 2 + 1*5 + 2*25 + 1*125, = 7 mod 25
        let ctx = Context::new(5, 1, 1, 30).unwrap();
        let f = Series::from_spec(&ctx, &[(0, 1, 1), (2, 1, 1)], None, rat_int(0)).unwrap();
        let out = hensel_lift(&f, &Elem::from_integer(&ctx, 2)).unwrap();
        let w = &out.root;
        let diff = w.sub(&Elem::from_integer(&ctx, 182));
        assert!(diff.is_zero_at_prec() || diff.valuation().unwrap().finite().unwrap() >= &rat_int(4));
        // |w - z0| <= |f(z0)|/|f'(z0)| = 5^{-1}
        let d = w.sub(&Elem::from_integer(&ctx, 2));
        assert!(d.valuation().unwrap().finite().unwrap() >= &rat_int(1));
        // residual doubling: v(f(z_n)) - 2 v(f') >= 2^n (v(f(z0)) - 2 v(f'))
        for (n, v) in out.residual_trace.iter().enumerate() {
            let expect = rat_int(1 << n);
            assert!(v >= &expect, "iteration {n}: {v} < {expect}");
        }
        // |f'(z_n)| constant
        assert!(out.deriv_trace.iter().all(|v| *v == rat_int(0)));
    }

    #[test]
    fn hensel_small_root_and_precondition() {
        // f = z^2 - z from z0 = p: unique small root 0
        let ctx = Context::new(7, 1, 1, 24).unwrap();
        let f = Series::from_spec(&ctx, &[(1, -1, 1), (2, 1, 1)], None, rat_int(0)).unwrap();
        let out = hensel_lift(&f, &Elem::from_integer(&ctx, 7)).unwrap();
        assert!(out.root.is_zero_at_prec());
        // f = z^2 from z0 = 0: derivative vanishes
        let f = Series::from_spec(&ctx, &[(2, 1, 1)], None, rat_int(0)).unwrap();
        assert!(matches!(
            hensel_lift(&f, &Elem::zero(&ctx)),
            Err(Error::HenselPreconditionFailed { .. })
        ));
    }

    #[test]
    fn polygon_examples() {
        let ctx = Context::new(3, 1, 2, 30).unwrap();
        // z^2 - p: hull (0,1),(2,0), one segment of root valuation 1/2
        let f = Series::from_spec(&ctx, &[(0, -3, 1), (2, 1, 1)], None, rat_int(0)).unwrap();
        let poly = newton_polygon(&f).unwrap();
        assert_eq!(poly.vertices, vec![(0, rat_int(1)), (2, rat_int(0))]);
        assert_eq!(
            poly.segments,
            vec![Segment {
                root_val: rat(1, 2),
                length: 2
            }]
        );
        // (z-1)(z-p) = z^2 - (1+p) z + p
        let f = Series::from_spec(&ctx, &[(0, 3, 1), (1, -4, 1), (2, 1, 1)], None, rat_int(0))
            .unwrap();
        let poly = newton_polygon(&f).unwrap();
        assert_eq!(
            poly.vertices,
            vec![(0, rat_int(1)), (1, rat_int(0)), (2, rat_int(0))]
        );
        assert_eq!(
            poly.segments,
            vec![
                Segment {
                    root_val: rat_int(1),
                    length: 1
                },
                Segment {
                    root_val: rat_int(0),
                    length: 1
                }
            ]
        );
        // constant series: no segments
        let c = Series::constant(&ctx, Elem::from_integer(&ctx, 9), rat_int(0));
        assert!(newton_polygon(&c).unwrap().segments.is_empty());
    }

    #[test]
    fn sphere_counts() {
        let ctx = Context::new(3, 1, 2, 30).unwrap();
        let f = Series::from_spec(&ctx, &[(0, -3, 1), (2, 1, 1)], None, rat_int(0)).unwrap();
        assert_eq!(count_roots_on_sphere(&f, &rat(1, 2)).unwrap(), 2);
        let f = Series::from_spec(&ctx, &[(0, 3, 1), (1, -4, 1), (2, 1, 1)], None, rat_int(0))
            .unwrap();
        assert_eq!(count_roots_on_sphere(&f, &rat_int(0)).unwrap(), 1);
        let ctx5 = Context::new(5, 1, 1, 30).unwrap();
        let f = Series::from_spec(&ctx5, &[(0, 1, 1), (2, 1, 1)], None, rat_int(0)).unwrap();
        assert_eq!(count_roots_on_sphere(&f, &rat_int(1)).unwrap(), 0);
    }

    #[test]
    fn solve_linear_and_square_roots() {
        // (z - c) = 0 at r_v = v(c)
        let ctx = Context::new(5, 1, 1, 30).unwrap();
        let c = Elem::from_integer(&ctx, 35);
        let f = Series::from_spec(&ctx, &[(1, 1, 1)], None, rat_int(0)).unwrap();
        let out = solve_on_sphere(&f, &c, &rat_int(1), 4, None).unwrap();
        assert_eq!(out.polygon_count, 1);
        assert_eq!(out.roots.len(), 1);
        assert!(out.roots[0].converged);
        let d = out.roots[0].point.sub(&c);
        assert!(d.is_zero_at_prec() || d.valuation().unwrap().finite().unwrap() >= &rat_int(10));

        // z^2 = -1 over p=5 at r_v = 0: roots = 2, 3 mod 5
        let f = Series::from_spec(&ctx, &[(2, 1, 1)], None, rat_int(0)).unwrap();
        let target = Elem::from_integer(&ctx, -1);
        let out = solve_on_sphere(&f, &target, &rat_int(0), 4, None).unwrap();
        assert_eq!(out.polygon_count, 2);
        assert_eq!(out.roots.len(), 2);
        let mut first: Vec<u64> = out
            .roots
            .iter()
            .map(|r| r.point.digit_at_pi(0).0[0])
            .collect();
        first.sort_unstable();
        assert_eq!(first, vec![2, 3]);
        for r in &out.roots {
            assert!(r.converged);
            // residual re-checked independently by eval
            let resid = f.eval(&r.point).unwrap().sub(&target);
            assert!(
                resid.is_zero_at_prec()
                    || resid.valuation().unwrap().finite().unwrap() >= &rat_int(15)
            );
        }
    }

    #[test]
    fn family_preimage_representability_gap_is_surfaced() {
        // p=3, solve P_1(x) = 1 at r_v = 1/3 in the field with pi^3 = 3:
        // the polygon counts 3 roots in the algebraic closure, the residue
        // equation forces first digit u = 1, and the expansion then stalls
        // outside the value group of K. The gap must be reported, not
        // hidden.
        let ctx = Context::new(3, 1, 3, 45).unwrap();
        let f = p_family_series(&ctx, &Elem::one(&ctx), rat_int(-1));
        let out = solve_on_sphere(&f, &Elem::one(&ctx), &rat(1, 3), 6, None).unwrap();
        assert_eq!(out.polygon_count, 3);
        assert!(out.roots.len() < 3);
        for r in &out.roots {
            assert!(!r.converged);
            assert_eq!(r.point.digit_at_pi(1).0[0], 1, "first residue digit");
            // the K-floor of the residual: g(pi) = 2 pi exactly
            assert_eq!(r.residual_val, Valuation::Finite(rat(1, 3)));
        }
    }

    #[test]
    fn image_balls() {
        // z^2 on the closed unit ball over p=3 is the closed unit ball
        let ctx = Context::new(3, 1, 1, 30).unwrap();
        let f = Series::from_spec(&ctx, &[(2, 1, 1)], None, rat_int(0)).unwrap();
        let b = UltraBall::closed(Elem::zero(&ctx), rat_int(0));
        let img = image_ball(&f, &b).unwrap();
        assert!(img.center.is_exact_zero());
        assert_eq!(img.radius_val, Valuation::Finite(rat_int(0)));
        assert!(img.closed);

        // P_1 over p=2 on the closed ball of radius rho = 1/2 about 0
        let ctx = Context::new(2, 1, 2, 40).unwrap();
        let f = p_family_series(&ctx, &Elem::one(&ctx), rat_int(-1));
        let b = UltraBall::closed(Elem::zero(&ctx), rat_int(1));
        let img = image_ball(&f, &b).unwrap();
        assert!(img.center.is_exact_zero());
        assert_eq!(img.radius_val, Valuation::Finite(rat_int(1)));

        // z + c translates balls
        let c = Elem::from_integer(&ctx, 5);
        let f = Series::new(&ctx, vec![(0, c.clone()), (1, Elem::one(&ctx))], None, rat_int(-1))
            .unwrap();
        let b = UltraBall::closed(Elem::one(&ctx), rat(3, 2));
        let img = image_ball(&f, &b).unwrap();
        assert_eq!(img.radius_val, Valuation::Finite(rat(3, 2)));
        assert!(img.center.sub(&Elem::from_integer(&ctx, 6)).is_exact_zero());
    }

    #[test]
    fn image_diameters() {
        let ctx = Context::new(2, 1, 16, 160).unwrap();
        // a point ball has image diameter infinity
        let f = p_family_series(&ctx, &Elem::one(&ctx), rat_int(-1));
        let pt = UltraBall::point(Elem::one(&ctx));
        assert_eq!(
            image_diameter_bound(&f, &pt).unwrap(),
            Valuation::Infinite
        );
        // Q=0, D = ball of radius S = 1/4 at x with |x| = rho_1:
        // exact image diameter 1/4 (the rho_0 * S bound is met exactly)
        let x = Elem::uniformizer_pow(&ctx, 8); // v = 1/2
        let d = UltraBall::closed(x, rat_int(2));
        assert_eq!(
            image_diameter_bound(&f, &d).unwrap(),
            Valuation::Finite(rat_int(2))
        );
        // affine maps leave diameters unchanged
        let aff = Series::from_spec(&ctx, &[(0, 7, 2), (1, 1, 1)], None, rat_int(-1)).unwrap();
        let b = UltraBall::closed(Elem::from_integer(&ctx, 3), rat(5, 4));
        assert_eq!(
            image_diameter_bound(&aff, &b).unwrap(),
            Valuation::Finite(rat(5, 4))
        );
    }

    #[test]
    fn map_degrees() {
        let ctx = Context::new(3, 1, 1, 30).unwrap();
        let unit = UltraBall::closed(Elem::zero(&ctx), rat_int(0));
        let sq = Series::from_spec(&ctx, &[(2, 1, 1)], None, rat_int(0)).unwrap();
        assert_eq!(map_degree(&sq, &unit).unwrap(), 2);
        let aff = Series::from_spec(&ctx, &[(0, 1, 1), (1, 1, 1)], None, rat_int(0)).unwrap();
        assert_eq!(map_degree(&aff, &unit).unwrap(), 1);
    }

    #[test]
    fn random_products_match_constructed_root_counts() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let ctx = Context::new(2, 1, 2, 60).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..40 {
            let deg = rng.gen_range(1..=5usize);
            let mut root_vals: Vec<i64> = (0..deg).map(|_| rng.gen_range(-2i64..5)).collect();
            // build prod (z - pi^{v} u) exactly
            let mut coeffs = vec![Elem::one(&ctx)];
            for &v in &root_vals {
                let r = Elem::uniformizer_pow(&ctx, v)
                    .mul(&Elem::from_integer(&ctx, 1 + 2 * rng.gen_range(0..20)));
                let mut next = vec![Elem::zero(&ctx); coeffs.len() + 1];
                for (i, c) in coeffs.iter().enumerate() {
                    next[i + 1] = next[i + 1].add(c);
                    next[i] = next[i].sub(&c.mul(&r));
                }
                coeffs = next;
            }
            let series = Series::new(
                &ctx,
                coeffs.into_iter().enumerate().map(|(i, c)| (i as u64, c)).collect(),
                None,
                rat_int(-4),
            )
            .unwrap();
            root_vals.sort_unstable();
            // every candidate radius on the half-integer grid
            for twice in -6i64..=12 {
                let r = rat(twice, 2);
                let got = count_roots_on_sphere(&series, &r).unwrap();
                let expected = root_vals
                    .iter()
                    .filter(|&&v| ctx.pi_to_val(v) == r)
                    .count() as u64;
                assert_eq!(got, expected, "radius exponent {r}, roots {root_vals:?}");
            }
        }
    }
}
