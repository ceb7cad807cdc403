//! Ultrametric balls in K.
//!
//! A ball stores a center, a radius exponent (radius = p^{-radius_val}) and
//! an open/closed flag. Because the value group of K is (1/e)Z, an open
//! ball of radius p^{-v} equals the closed ball of radius p^{-v-1/e}; the
//! effective closed exponent is what all the set relations reduce to.

use super::elem::{Elem, Valuation};
use super::Rat;
use crate::error::{Error, Result};
use num_bigint::BigInt;

#[derive(Clone, Debug)]
pub struct UltraBall {
    pub center: Elem,
    /// Radius exponent; Infinite means the degenerate point ball.
    pub radius_val: Valuation,
    pub closed: bool,
}

impl UltraBall {
    pub fn closed(center: Elem, radius_val: Rat) -> UltraBall {
        UltraBall {
            center,
            radius_val: Valuation::Finite(radius_val),
            closed: true,
        }
    }

    pub fn open(center: Elem, radius_val: Rat) -> UltraBall {
        UltraBall {
            center,
            radius_val: Valuation::Finite(radius_val),
            closed: false,
        }
    }

    pub fn point(center: Elem) -> UltraBall {
        UltraBall {
            center,
            radius_val: Valuation::Infinite,
            closed: true,
        }
    }

    pub fn is_point(&self) -> bool {
        self.radius_val.is_infinite()
    }

    /// Smallest closed-ball exponent describing the same set.
    pub fn effective_closed_val(&self) -> Valuation {
        match (&self.radius_val, self.closed) {
            (Valuation::Infinite, _) => Valuation::Infinite,
            (Valuation::Finite(v), true) => Valuation::Finite(v.clone()),
            (Valuation::Finite(v), false) => {
                let e = self.center.context().e();
                Valuation::Finite(v + Rat::new(BigInt::from(1), BigInt::from(e)))
            }
        }
    }

    /// Membership depends only on |x - center| vs the radius: every point
    /// of a ball is a center.
    pub fn contains(&self, x: &Elem) -> Result<bool> {
        let d = x.sub(&self.center);
        let eff = self.effective_closed_val();
        match (d.valuation(), eff) {
            (_, Valuation::Infinite) => match d.valuation() {
                Ok(Valuation::Infinite) => Ok(true),
                Ok(_) => Ok(false),
                Err(e) => Err(e),
            },
            (Ok(Valuation::Infinite), _) => Ok(true),
            (Ok(Valuation::Finite(vd)), Valuation::Finite(r)) => Ok(vd >= r),
            (Err(_), Valuation::Finite(r)) => {
                // difference indistinguishable from 0: val >= prec
                let prec = d.context().pi_to_val(d.prec_pi());
                if prec >= r {
                    Ok(true)
                } else {
                    Err(Error::PrecisionLoss(
                        "ball membership undecidable at working precision".into(),
                    ))
                }
            }
        }
    }

    pub fn contains_ball(&self, other: &UltraBall) -> Result<bool> {
        let eff_s = self.effective_closed_val();
        let eff_o = other.effective_closed_val();
        let radii_ok = match (&eff_s, &eff_o) {
            (Valuation::Infinite, Valuation::Infinite) => true,
            (Valuation::Infinite, Valuation::Finite(_)) => false,
            (Valuation::Finite(_), Valuation::Infinite) => true,
            (Valuation::Finite(a), Valuation::Finite(b)) => b >= a,
        };
        if !radii_ok {
            return Ok(false);
        }
        self.contains(&other.center)
    }

    /// Two balls intersect iff the center distance is within the larger
    /// radius; together with `contains_ball` this realizes "two balls with
    /// nonempty intersection are nested".
    pub fn intersects(&self, other: &UltraBall) -> Result<bool> {
        let eff_s = self.effective_closed_val();
        let eff_o = other.effective_closed_val();
        let larger = match (&eff_s, &eff_o) {
            (Valuation::Infinite, x) => x.clone(),
            (x, Valuation::Infinite) => x.clone(),
            (Valuation::Finite(a), Valuation::Finite(b)) => {
                Valuation::Finite(a.clone().min(b.clone()))
            }
        };
        let d = other.center.sub(&self.center);
        match (d.valuation(), larger) {
            (Ok(Valuation::Infinite), _) => Ok(true),
            (_, Valuation::Infinite) => match d.valuation() {
                Ok(Valuation::Infinite) => Ok(true),
                Ok(_) => Ok(false),
                Err(e) => Err(e),
            },
            (Ok(Valuation::Finite(vd)), Valuation::Finite(r)) => Ok(vd >= r),
            (Err(_), Valuation::Finite(r)) => {
                let prec = d.context().pi_to_val(d.prec_pi());
                if prec >= r {
                    Ok(true)
                } else {
                    Err(Error::PrecisionLoss(
                        "ball intersection undecidable at working precision".into(),
                    ))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{rat, rat_int, Context};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_elem(ctx: &Context, rng: &mut ChaCha8Rng, vmin: i64, vmax: i64) -> Elem {
        use crate::padic::residue::FqElem;
        let v = rng.gen_range(vmin..=vmax);
        let mut digits = vec![FqElem::from_scalar(1 + rng.gen_range(0..ctx.p() - 1))];
        for _ in 0..20 {
            digits.push(FqElem::from_scalar(rng.gen_range(0..ctx.p())));
        }
        Elem::from_digits(ctx, v, &digits, v + 24)
    }

    #[test]
    fn every_member_is_a_center() {
        let ctx = Context::new(3, 1, 2, 48).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let c = random_elem(&ctx, &mut rng, -4, 8);
            let ball = UltraBall::closed(c.clone(), rat(3, 2));
            // x = c + delta with v(delta) >= 3/2
            let delta = random_elem(&ctx, &mut rng, 3, 10);
            let x = c.add(&delta);
            assert!(ball.contains(&x).unwrap());
            let reball = UltraBall::closed(x, rat(3, 2));
            assert!(reball.contains(&ball.center).unwrap());
            assert!(reball.contains_ball(&ball).unwrap());
            assert!(ball.contains_ball(&reball).unwrap());
        }
    }

    #[test]
    fn intersecting_balls_nest() {
        let ctx = Context::new(2, 1, 2, 48).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a = UltraBall::closed(
                random_elem(&ctx, &mut rng, -2, 6),
                rat(rng.gen_range(0..8), 2),
            );
            let b = UltraBall::closed(
                random_elem(&ctx, &mut rng, -2, 6),
                rat(rng.gen_range(0..8), 2),
            );
            if a.intersects(&b).unwrap() {
                assert!(
                    a.contains_ball(&b).unwrap() || b.contains_ball(&a).unwrap()
                );
            }
        }
    }

    #[test]
    fn open_versus_closed_boundary() {
        let ctx = Context::new(5, 1, 1, 24).unwrap();
        let c = Elem::zero(&ctx);
        let open = UltraBall::open(c.clone(), rat_int(1));
        let closed = UltraBall::closed(c, rat_int(1));
        let x = Elem::from_integer(&ctx, 5); // |x| = 5^{-1}: on the sphere
        assert!(closed.contains(&x).unwrap());
        assert!(!open.contains(&x).unwrap());
    }
}
