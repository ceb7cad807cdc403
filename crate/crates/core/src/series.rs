//! Polynomials and tail-bounded power series over K with Gauss norms.
//!
//! A `Series` is a finite list of coefficients plus an optional certified
//! tail bound v(a_i) >= base + slope*(i - from) for all unlisted i >= from.
//! Everything a computation cannot pin down exactly (evaluation error from
//! the tail, norms dominated by the tail) is reported as precision or as a
//! hard error, never silently absorbed.

use crate::error::{Error, Result};
use crate::padic::elem::PREC_INF;
use crate::padic::{Context, Elem, Rat, UltraBall, Valuation};
use num_bigint::BigInt;
use num_traits::Zero;
use std::collections::BTreeMap;

/// Certified lower bound on the valuations of unlisted coefficients.
#[derive(Clone, Debug)]
pub struct TailBound {
    pub from_index: u64,
    pub base: Rat,
    pub slope: Rat,
}

impl TailBound {
    /// The CLI form {from_index, val_slope}: v(a_i) >= val_slope * i.
    pub fn through_origin(from_index: u64, val_slope: Rat) -> TailBound {
        TailBound {
            base: &val_slope * Rat::from(BigInt::from(from_index)),
            from_index,
            slope: val_slope,
        }
    }

    fn bound_at(&self, i: u64) -> Rat {
        &self.base + &self.slope * Rat::from(BigInt::from(i) - BigInt::from(self.from_index))
    }
}

#[derive(Clone, Debug)]
pub struct Series {
    ctx: Context,
    coeffs: BTreeMap<u64, Elem>,
    pub tail: Option<TailBound>,
    /// Radius exponent of the closed ball the series converges on.
    pub domain_radius_val: Rat,
}

impl Series {
    pub fn new(
        ctx: &Context,
        coeffs: Vec<(u64, Elem)>,
        tail: Option<TailBound>,
        domain_radius_val: Rat,
    ) -> Result<Series> {
        let mut map = BTreeMap::new();
        for (i, c) in coeffs {
            if !c.context().same_as(ctx) {
                return Err(Error::ContextMismatch);
            }
            if c.is_exact_zero() {
                continue;
            }
            let prev: Option<Elem> = map.insert(i, c);
            if prev.is_some() {
                return Err(Error::Parse(format!("duplicate coefficient index {i}")));
            }
        }
        let s = Series {
            ctx: ctx.clone(),
            coeffs: map,
            tail,
            domain_radius_val,
        };
        s.check_convergence()?;
        Ok(s)
    }

    /// Coefficient list of [index, numerator, denominator] entries, the
    /// external input format.
    pub fn from_spec(
        ctx: &Context,
        entries: &[(u64, i64, i64)],
        tail: Option<(u64, Rat)>,
        domain_radius_val: Rat,
    ) -> Result<Series> {
        let mut coeffs = Vec::new();
        for &(i, num, den) in entries {
            if den == 0 {
                return Err(Error::Parse(format!("coefficient {i} has denominator 0")));
            }
            coeffs.push((
                i,
                Elem::from_rational(ctx, Rat::new(BigInt::from(num), BigInt::from(den))),
            ));
        }
        let tail = tail.map(|(from, slope)| TailBound::through_origin(from, slope));
        Series::new(ctx, coeffs, tail, domain_radius_val)
    }

    pub fn zero(ctx: &Context, domain_radius_val: Rat) -> Series {
        Series {
            ctx: ctx.clone(),
            coeffs: BTreeMap::new(),
            tail: None,
            domain_radius_val,
        }
    }

    pub fn constant(ctx: &Context, c: Elem, domain_radius_val: Rat) -> Series {
        Series::new(ctx, vec![(0, c)], None, domain_radius_val).expect("constant series")
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    pub fn coeff(&self, i: u64) -> Elem {
        self.coeffs
            .get(&i)
            .cloned()
            .unwrap_or_else(|| Elem::zero(&self.ctx))
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&u64, &Elem)> {
        self.coeffs.iter()
    }

    pub fn max_index(&self) -> Option<u64> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn is_polynomial(&self) -> bool {
        self.tail.is_none()
    }

    fn check_convergence(&self) -> Result<()> {
        if let Some(t) = &self.tail {
            // lim |a_i| r^i = 0 on the domain needs slope + r_v > 0
            if &t.slope + &self.domain_radius_val <= Rat::zero() {
                return Err(Error::AdmissionFailed(format!(
                    "tail slope {} does not converge on radius exponent {}",
                    t.slope, self.domain_radius_val
                )));
            }
        }
        Ok(())
    }

    /// Lower bound info for min_i (v(a_i) + i r_v) over i >= min_index.
    /// Returns (attained minimum over listed coefficients with exact
    /// valuations, witnesses) and errors if an imprecise coefficient or the
    /// tail could fall at or below that minimum.
    pub(crate) fn norm_exponent_from(
        &self,
        min_index: u64,
        r_v: &Rat,
    ) -> Result<(Valuation, Vec<u64>)> {
        let mut best: Option<Rat> = None;
        let mut witnesses: Vec<u64> = Vec::new();
        let mut imprecise: Vec<(u64, Rat)> = Vec::new();
        for (&i, c) in self.coeffs.range(min_index..) {
            let iv = Rat::from(BigInt::from(i));
            match c.valuation() {
                Ok(Valuation::Infinite) => continue,
                Ok(Valuation::Finite(v)) => {
                    let cand = &v + &iv * r_v;
                    match &best {
                        None => {
                            best = Some(cand);
                            witnesses = vec![i];
                        }
                        Some(b) => {
                            if cand < *b {
                                best = Some(cand);
                                witnesses = vec![i];
                            } else if cand == *b {
                                witnesses.push(i);
                            }
                        }
                    }
                }
                Err(_) => {
                    let bound = c.context().pi_to_val(c.prec_pi()) + &iv * r_v;
                    imprecise.push((i, bound));
                }
            }
        }
        // imprecise coefficients may only sit strictly above the minimum
        if let Some(b) = &best {
            for (i, bound) in &imprecise {
                if bound <= b {
                    return Err(Error::PrecisionLoss(format!(
                        "coefficient {i} undetermined at a level that may reach the Gauss norm"
                    )));
                }
            }
        } else if !imprecise.is_empty() {
            return Err(Error::PrecisionLoss(
                "all candidate coefficients are undetermined".into(),
            ));
        }
        if let Some(t) = &self.tail {
            let start = t.from_index.max(min_index);
            // inf over i >= start of bound_at(i) + i r_v; slope + r_v > 0
            // so the infimum is at i = start
            let tail_inf = t.bound_at(start) + Rat::from(BigInt::from(start)) * r_v;
            match &best {
                Some(b) => {
                    if &tail_inf <= b {
                        return Err(Error::TailDominates(format!(
                            "tail bound p^-{tail_inf} reaches the Gauss norm p^-{b}"
                        )));
                    }
                }
                None => {
                    return Err(Error::TailDominates(
                        "norm determined only by the tail bound".into(),
                    ))
                }
            }
        }
        match best {
            None => Ok((Valuation::Infinite, witnesses)),
            Some(b) => Ok((Valuation::Finite(b), witnesses)),
        }
    }

    /// The Gauss norm exponent g with ||f||_{B_r} = p^{-g} for the closed
    /// ball of radius exponent r_v; Infinite for the zero series.
    pub fn gauss_norm(&self, r_v: &Rat) -> Result<Valuation> {
        // polynomials converge everywhere; the domain only binds a tail
        if self.tail.is_some() && *r_v < self.domain_radius_val {
            return Err(Error::AdmissionFailed(format!(
                "radius exponent {r_v} lies outside the domain ball (exponent {})",
                self.domain_radius_val
            )));
        }
        Ok(self.norm_exponent_from(0, r_v)?.0)
    }

    /// Horner evaluation. The result precision accounts for the certified
    /// tail: unlisted terms contribute O(p^{tail bound at |x|}).
    pub fn eval(&self, x: &Elem) -> Result<Elem> {
        if !x.context().same_as(&self.ctx) {
            return Err(Error::ContextMismatch);
        }
        let xv_low = self.ctx.pi_to_val(x.vlow_pi());
        if self.tail.is_some() && xv_low < self.domain_radius_val {
            // |x| might exceed the radius the tail bound is certified on
            match x.valuation()? {
                Valuation::Infinite => {}
                Valuation::Finite(v) => {
                    if v < self.domain_radius_val {
                        return Err(Error::AdmissionFailed(format!(
                            "evaluation point with valuation {v} outside domain (exponent {})",
                            self.domain_radius_val
                        )));
                    }
                }
            }
        }
        let mut acc = Elem::zero(&self.ctx);
        let mut last_index: Option<u64> = None;
        for (&i, c) in self.coeffs.iter().rev() {
            match last_index {
                None => acc = c.clone(),
                Some(prev) => {
                    let gap = (prev - i) as u32;
                    acc = acc.mul(&x.pow_u(gap)).add(c);
                }
            }
            last_index = Some(i);
        }
        if let Some(i0) = last_index {
            if i0 > 0 {
                acc = acc.mul(&x.pow_u(i0 as u32));
            }
        }
        if let Some(t) = &self.tail {
            // tail error bound at this point
            let xv = match x.valuation()? {
                Valuation::Infinite => None,
                Valuation::Finite(v) => Some(v),
            };
            if let Some(xv) = xv {
                let err_v = t.bound_at(t.from_index)
                    + Rat::from(BigInt::from(t.from_index)) * &xv;
                let err_pi = self.ctx.val_to_pi(&floor_to_grid(&err_v, self.ctx.e()))?;
                acc = acc.demoted(err_pi.min(acc.prec_pi()));
            }
        }
        Ok(acc)
    }

    /// Term-wise derivative: index i picks up a factor i+1 from index i+1.
    pub fn derivative(&self) -> Series {
        let mut coeffs = BTreeMap::new();
        for (&i, c) in &self.coeffs {
            if i == 0 {
                continue;
            }
            let d = c.mul(&Elem::from_rational(
                &self.ctx,
                Rat::from(BigInt::from(i)),
            ));
            if !d.is_exact_zero() {
                coeffs.insert(i - 1, d);
            }
        }
        let tail = self.tail.as_ref().map(|t| {
            // v((i+1) a_{i+1}) >= v(a_{i+1}) >= base + slope*(i+1-from)
            let from = t.from_index.saturating_sub(1);
            TailBound {
                from_index: from,
                base: t.bound_at(from + 1),
                slope: t.slope.clone(),
            }
        });
        Series {
            ctx: self.ctx.clone(),
            coeffs,
            tail,
            domain_radius_val: self.domain_radius_val.clone(),
        }
    }

    /// Exact coefficients of t -> f(c + t) on the residual disc.
    pub fn recenter(&self, c: &Elem) -> Result<Series> {
        if !c.context().same_as(&self.ctx) {
            return Err(Error::ContextMismatch);
        }
        let cv_low = self.ctx.pi_to_val(c.vlow_pi());
        if self.tail.is_some() && cv_low < self.domain_radius_val {
            match c.valuation()? {
                Valuation::Infinite => {}
                Valuation::Finite(v) => {
                    if v < self.domain_radius_val {
                        return Err(Error::AdmissionFailed(
                            "recentering point outside domain".into(),
                        ));
                    }
                }
            }
        }
        let deg = match self.max_index() {
            None => {
                return Ok(Series {
                    ctx: self.ctx.clone(),
                    coeffs: BTreeMap::new(),
                    tail: self.tail.clone(),
                    domain_radius_val: self.domain_radius_val.clone(),
                })
            }
            Some(d) => d,
        };
        // powers of c up to deg
        let mut cpow: Vec<Elem> = Vec::with_capacity(deg as usize + 1);
        cpow.push(Elem::one(&self.ctx));
        for _ in 1..=deg {
            let last = cpow.last().unwrap().clone();
            cpow.push(last.mul(c));
        }
        let mut out: BTreeMap<u64, Elem> = BTreeMap::new();
        for j in 0..=deg {
            let mut acc = Elem::zero(&self.ctx);
            for (&i, a) in self.coeffs.range(j..) {
                let bin = num_integer::binomial(BigInt::from(i), BigInt::from(j));
                let term = a
                    .mul(&Elem::from_rational(&self.ctx, Rat::from(bin)))
                    .mul(&cpow[(i - j) as usize]);
                acc = acc.add(&term);
            }
            if !acc.is_exact_zero() {
                // tail contribution to b_j is an error term O(p^{bound})
                if let Some(t) = &self.tail {
                    let i0 = t.from_index.max(j);
                    if let Ok(Valuation::Finite(cv)) = c.valuation() {
                        let bound = t.bound_at(i0)
                            + Rat::from(BigInt::from(i0 - j)) * &cv;
                        let bound_pi =
                            self.ctx.val_to_pi(&floor_to_grid(&bound, self.ctx.e()))?;
                        acc = acc.demoted(bound_pi.min(acc.prec_pi()));
                    }
                }
                out.insert(j, acc);
            }
        }
        Ok(Series {
            ctx: self.ctx.clone(),
            coeffs: out,
            tail: self.tail.clone(),
            domain_radius_val: self.domain_radius_val.clone(),
        })
    }

    /// f - w as a series.
    pub fn sub_const(&self, w: &Elem) -> Series {
        let mut coeffs = self.coeffs.clone();
        let a0 = coeffs.remove(&0).unwrap_or_else(|| Elem::zero(&self.ctx));
        let new0 = a0.sub(w);
        if !new0.is_exact_zero() {
            coeffs.insert(0, new0);
        }
        Series {
            ctx: self.ctx.clone(),
            coeffs,
            tail: self.tail.clone(),
            domain_radius_val: self.domain_radius_val.clone(),
        }
    }

    /// Coefficient-wise sum (domains must agree).
    pub fn add_series(&self, other: &Series) -> Result<Series> {
        if self.domain_radius_val != other.domain_radius_val {
            return Err(Error::AdmissionFailed(
                "series sum across different domains".into(),
            ));
        }
        let mut coeffs = self.coeffs.clone();
        for (&i, c) in &other.coeffs {
            let cur = coeffs.remove(&i).unwrap_or_else(|| Elem::zero(&self.ctx));
            let s = cur.add(c);
            if !s.is_exact_zero() {
                coeffs.insert(i, s);
            }
        }
        let tail = match (&self.tail, &other.tail) {
            (None, None) => None,
            (Some(t), None) | (None, Some(t)) => Some(t.clone()),
            (Some(a), Some(b)) => {
                // conservative: max start, min of the two bounds there and min slope
                let from = a.from_index.max(b.from_index);
                let base = a.bound_at(from).min(b.bound_at(from));
                let slope = a.slope.clone().min(b.slope.clone());
                Some(TailBound {
                    from_index: from,
                    base,
                    slope,
                })
            }
        };
        Series::new(
            &self.ctx,
            coeffs.into_iter().collect(),
            tail,
            self.domain_radius_val.clone(),
        )
    }

    /// The exact image of a ball: Corollary-style center/radius formula.
    pub fn image_ball(&self, ball: &UltraBall) -> Result<UltraBall> {
        let center = self.eval(&ball.center)?;
        if ball.is_point() {
            return Ok(UltraBall::point(center));
        }
        let shifted = self.recenter(&ball.center)?;
        let r_v = match &ball.radius_val {
            Valuation::Finite(v) => v.clone(),
            Valuation::Infinite => unreachable!(),
        };
        let (g, _) = shifted.norm_exponent_from(1, &r_v)?;
        match g {
            Valuation::Infinite => Ok(UltraBall::point(center)),
            Valuation::Finite(g) => Ok(UltraBall {
                center,
                radius_val: Valuation::Finite(g),
                closed: ball.closed,
            }),
        }
    }

    /// Radius exponent of `image_ball`, exported for certificate ledgers.
    pub fn image_diameter_bound(&self, ball: &UltraBall) -> Result<Valuation> {
        Ok(self.image_ball(ball)?.radius_val)
    }
}

/// Round a rational valuation down to the (1/e)Z grid.
pub fn floor_to_grid(v: &Rat, e: u64) -> Rat {
    let scaled = v * Rat::from(BigInt::from(e));
    let fl = scaled.floor().to_integer();
    Rat::new(fl, BigInt::from(e))
}

/// Admission test for a perturbation Q in H(B): requires ||Q||_B < rho
/// strictly, where rho has exponent 1/(p-1). The boundary case is rejected.
pub fn admit_perturbation(q: &Series, r_hat_val: &Rat) -> Result<()> {
    let p = q.context().p();
    let rho_v = Rat::new(BigInt::from(1), BigInt::from(p - 1));
    match q.gauss_norm(r_hat_val)? {
        Valuation::Infinite => Ok(()),
        Valuation::Finite(g) => {
            if g > rho_v {
                Ok(())
            } else {
                Err(Error::AdmissionFailed(format!(
                    "||Q|| = p^-{g} is not strictly below rho = p^-{rho_v}"
                )))
            }
        }
    }
}

/// Convenience: the norm exponent as a plain option (Infinite -> None).
pub fn norm_exponent(v: &Valuation) -> Option<&Rat> {
    v.finite()
}

pub fn prec_inf() -> i64 {
    PREC_INF
}

/// The family polynomial P_lambda(z) = (lambda/p) z^p + (1 - lambda/p) z^{p+1}
/// as a series on the ball of radius exponent `domain_radius_val`.
pub fn p_family_series(ctx: &Context, lambda: &Elem, domain_radius_val: Rat) -> Series {
    let p = ctx.p();
    let inv_p = Elem::from_rational(ctx, Rat::new(BigInt::from(1), BigInt::from(p)));
    let lam_over_p = lambda.mul(&inv_p);
    let one_minus = Elem::one(ctx).sub(&lam_over_p);
    Series::new(
        ctx,
        vec![(p, lam_over_p), (p + 1, one_minus)],
        None,
        domain_radius_val,
    )
    .expect("family series")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{rat, rat_int};

    fn p1_series(ctx: &Context) -> Series {
        // P_1 for p=2: z^2/2 + z^3/2 on the ball of radius p (exponent -1)
        p_family_series(ctx, &Elem::one(ctx), rat_int(-1))
    }

    #[test]
    fn gauss_norm_examples() {
        let ctx = Context::new(2, 1, 2, 60).unwrap();
        let f = p1_series(&ctx);
        // at r = 1 (exponent 0): both coefficients give |1/2| = 2, g = -1
        assert_eq!(
            f.gauss_norm(&rat_int(0)).unwrap(),
            Valuation::Finite(rat_int(-1))
        );
        // at r = rho = 1/2 (exponent 1): max(2*2^-2, 2*2^-3) = 1/2, g = 1
        assert_eq!(
            f.gauss_norm(&rat_int(1)).unwrap(),
            Valuation::Finite(rat_int(1))
        );
        // constant p^2 has norm p^-2 at any radius
        let ctx5 = Context::new(5, 1, 1, 40).unwrap();
        let c = Series::constant(&ctx5, Elem::from_integer(&ctx5, 25), rat_int(-1));
        assert_eq!(
            c.gauss_norm(&rat_int(0)).unwrap(),
            Valuation::Finite(rat_int(2))
        );
        assert_eq!(
            c.gauss_norm(&rat_int(-1)).unwrap(),
            Valuation::Finite(rat_int(2))
        );
    }

    #[test]
    fn eval_examples() {
        // P_1(1) = 1 for several p
        for p in [2u64, 3, 5] {
            let ctx = Context::new(p, 1, 1, 40).unwrap();
            let f = p_family_series(&ctx, &Elem::one(&ctx), rat_int(-1));
            let y = f.eval(&Elem::one(&ctx)).unwrap();
            assert!(y.sub(&Elem::one(&ctx)).is_exact_zero(), "p = {p}");
        }
        // p=3: P_1(-1) = -1/3 + 2/3 = 1/3, valuation -1
        let ctx = Context::new(3, 1, 1, 40).unwrap();
        let f = p_family_series(&ctx, &Elem::one(&ctx), rat_int(-1));
        let y = f.eval(&Elem::from_integer(&ctx, -1)).unwrap();
        assert!(y
            .sub(&Elem::from_rational(&ctx, rat(1, 3)))
            .is_exact_zero());
        assert_eq!(y.valuation().unwrap(), Valuation::Finite(rat_int(-1)));
        // zero series evaluates to 0
        let z = Series::zero(&ctx, rat_int(-1));
        assert!(z.eval(&Elem::from_integer(&ctx, 7)).unwrap().is_exact_zero());
    }

    #[test]
    fn derivative_examples() {
        let ctx = Context::new(2, 1, 1, 40).unwrap();
        // d/dz (z^2 + 1) = 2z
        let f = Series::from_spec(&ctx, &[(0, 1, 1), (2, 1, 1)], None, rat_int(0)).unwrap();
        let d = f.derivative();
        assert!(d.coeff(1).sub(&Elem::from_integer(&ctx, 2)).is_exact_zero());
        assert!(d.coeff(0).is_exact_zero());
        assert_eq!(d.max_index(), Some(1));
        // P_1' for p=2: z + (3/2) z^2
        let f = p1_series(&ctx);
        let d = f.derivative();
        assert!(d.coeff(1).sub(&Elem::one(&ctx)).is_exact_zero());
        assert!(d
            .coeff(2)
            .sub(&Elem::from_rational(&ctx, rat(3, 2)))
            .is_exact_zero());
        // derivative of a constant is the zero series
        let c = Series::constant(&ctx, Elem::from_integer(&ctx, 9), rat_int(0));
        assert_eq!(c.derivative().max_index(), None);
    }

    #[test]
    fn recenter_examples() {
        let ctx = Context::new(2, 1, 1, 40).unwrap();
        // z^2 at 1 -> 1 + 2t + t^2
        let f = Series::from_spec(&ctx, &[(2, 1, 1)], None, rat_int(0)).unwrap();
        let g = f.recenter(&Elem::one(&ctx)).unwrap();
        assert!(g.coeff(0).sub(&Elem::one(&ctx)).is_exact_zero());
        assert!(g.coeff(1).sub(&Elem::from_integer(&ctx, 2)).is_exact_zero());
        assert!(g.coeff(2).sub(&Elem::one(&ctx)).is_exact_zero());
        // recentering at 0 is the identity
        let h = f.recenter(&Elem::zero(&ctx)).unwrap();
        assert!(h.coeff(2).sub(&Elem::one(&ctx)).is_exact_zero());
        assert_eq!(h.coeffs.len(), 1);
        // P_1 recentred at 1: constant 1, linear coefficient 5/2 of |.| = 2
        let f = p1_series(&ctx);
        let g = f.recenter(&Elem::one(&ctx)).unwrap();
        assert!(g.coeff(0).sub(&Elem::one(&ctx)).is_exact_zero());
        assert!(g
            .coeff(1)
            .sub(&Elem::from_rational(&ctx, rat(5, 2)))
            .is_exact_zero());
        assert_eq!(
            g.coeff(1).valuation().unwrap(),
            Valuation::Finite(rat_int(-1))
        );
    }

    #[test]
    fn recenter_round_trip_and_norm_multiplicativity() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let ctx = Context::new(3, 1, 1, 60).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let mut entries = Vec::new();
            for i in 0..5u64 {
                let num = rng.gen_range(-40i64..40);
                if num != 0 {
                    entries.push((i, num, 1 + rng.gen_range(0..3) * 2));
                }
            }
            if entries.is_empty() {
                continue;
            }
            let f = Series::from_spec(&ctx, &entries, None, rat_int(0)).unwrap();
            let c = Elem::from_integer(&ctx, rng.gen_range(-9i64..9));
            let g = f.recenter(&c).unwrap().recenter(&c.neg()).unwrap();
            for (&i, a) in f.coeffs() {
                assert!(g.coeff(i).sub(a).is_exact_zero());
            }
            // Gauss's lemma on a product of two random polynomials
            let h = Series::from_spec(
                &ctx,
                &[(0, rng.gen_range(1..20), 3), (2, rng.gen_range(1..20), 1)],
                None,
                rat_int(0),
            )
            .unwrap();
            let prod = poly_mul(&f, &h);
            let r = rat(rng.gen_range(-2i64..3), 1);
            let nf = f.gauss_norm(&r).unwrap();
            let nh = h.gauss_norm(&r).unwrap();
            let np = prod.gauss_norm(&r).unwrap();
            match (nf, nh, np) {
                (Valuation::Finite(a), Valuation::Finite(b), Valuation::Finite(c)) => {
                    assert_eq!(a + b, c)
                }
                _ => panic!("unexpected zero polynomial"),
            }
        }
    }

    #[test]
    fn eval_bounded_by_norm() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let ctx = Context::new(5, 1, 2, 60).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let f = Series::from_spec(
            &ctx,
            &[(0, 7, 5), (1, 2, 1), (3, 11, 1), (4, 1, 25)],
            None,
            rat_int(-1),
        )
        .unwrap();
        for _ in 0..40 {
            // |x| <= 1 sample inside the unit ball
            let x = Elem::from_integer(&ctx, rng.gen_range(-200i64..200));
            let y = f.eval(&x).unwrap();
            let g = f.gauss_norm(&rat_int(0)).unwrap();
            match (y.valuation().unwrap(), g) {
                (Valuation::Finite(vy), Valuation::Finite(gn)) => assert!(vy >= gn),
                (Valuation::Infinite, _) => {}
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn tail_bound_interactions() {
        let ctx = Context::new(2, 1, 1, 40).unwrap();
        // listed head + geometric tail from index 3 with slope 2
        let f = Series::from_spec(
            &ctx,
            &[(0, 1, 2), (1, 3, 1)],
            Some((3, rat_int(2))),
            rat_int(-1),
        )
        .unwrap();
        // norm at r=1: head gives min(-1, 0) = -1; tail inf = 6: fine
        assert_eq!(
            f.gauss_norm(&rat_int(0)).unwrap(),
            Valuation::Finite(rat_int(-1))
        );
        // on the full domain ball the linear term deepens: min(-1, -1) = -1
        assert_eq!(
            f.gauss_norm(&rat_int(-1)).unwrap(),
            Valuation::Finite(rat_int(-1))
        );
        // a radius outside the certified domain is rejected
        assert!(f.gauss_norm(&rat_int(-2)).is_err());
        // divergent tail on a bigger ball is rejected at construction
        assert!(Series::from_spec(
            &ctx,
            &[(0, 1, 1)],
            Some((2, rat_int(-1))),
            rat_int(0),
        )
        .is_err());
        // evaluation carries the tail error as finite precision:
        // at v(x) = 1 the tail terms are O(p^{3i}) from i = 3, so O(p^9)
        let x = Elem::from_integer(&ctx, 2);
        let y = f.eval(&x).unwrap();
        assert!(y.prec_pi() <= 9 * ctx.e() as i64);
    }

    #[test]
    fn admission_boundary_is_rejected() {
        let ctx = Context::new(2, 1, 2, 40).unwrap();
        // rho = 2^{-1}; Q = constant of exponent exactly 1 must be rejected
        let q_boundary = Series::constant(&ctx, Elem::from_integer(&ctx, 2), rat_int(-1));
        assert!(admit_perturbation(&q_boundary, &rat_int(-1)).is_err());
        // strictly smaller is admitted
        let q_ok = Series::constant(&ctx, Elem::from_integer(&ctx, 4), rat_int(-1));
        assert!(admit_perturbation(&q_ok, &rat_int(-1)).is_ok());
        // zero is admitted
        let q0 = Series::zero(&ctx, rat_int(-1));
        assert!(admit_perturbation(&q0, &rat_int(-1)).is_ok());
    }

    /// test-only polynomial product (used by the Gauss lemma check)
    fn poly_mul(a: &Series, b: &Series) -> Series {
        let ctx = a.context().clone();
        let mut acc: BTreeMap<u64, Elem> = BTreeMap::new();
        for (&i, x) in a.coeffs() {
            for (&j, y) in b.coeffs() {
                let t = x.mul(y);
                let cur = acc.remove(&(i + j)).unwrap_or_else(|| Elem::zero(&ctx));
                acc.insert(i + j, cur.add(&t));
            }
        }
        Series::new(
            &ctx,
            acc.into_iter().collect(),
            None,
            a.domain_radius_val.clone(),
        )
        .unwrap()
    }
}
