//! The perturbed family Q*_lambda = P_lambda + Q and its affine conjugate.
//!
//! P_lambda(z) = (lambda/p) z^p + (1 - lambda/p) z^{p+1} with
//! |lambda - 1| < 1, perturbed by Q with ||Q||_B < rho. The working map is
//! the conjugate Q_lambda = A^{-1} o Q*_lambda o A with A(z) = z + h - 1,
//! where h is the fixed point of Q*_lambda near 1; conjugating moves the
//! repelling fixed point back to 1 so the symbolic coding over B_1(0) and
//! B_1(1) is uniform in the perturbation.

use crate::analysis::{hensel_lift, map_degree};
use crate::error::{Error, Result};
use crate::padic::{Context, Elem, Rat, UltraBall, Valuation};
use crate::series::{admit_perturbation, p_family_series, Series};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// The radii the family is built from, as exact valuation exponents:
/// rho = p^{-1/(p-1)} (invariant ball), the sphere radii rho_n with
/// p rho_n^p = rho_{n-1}, and S with p S^{p-1} = rho (wandering disc
/// radius).
#[derive(Clone, Debug)]
pub struct FamilyConstants {
    pub p: u64,
    pub rho_val: Rat,
    pub s_val: Rat,
    pub r_hat_val: Rat,
}

impl FamilyConstants {
    pub fn new(p: u64, r_hat_val: Rat) -> Result<FamilyConstants> {
        if r_hat_val >= Rat::zero() {
            return Err(Error::AdmissionFailed(
                "the outer ball must have radius > 1 (negative exponent)".into(),
            ));
        }
        let pm1 = BigInt::from(p - 1);
        Ok(FamilyConstants {
            p,
            rho_val: Rat::new(BigInt::one(), pm1.clone()),
            s_val: Rat::new(BigInt::from(p), &pm1 * &pm1),
            r_hat_val,
        })
    }

    /// rho_0 = 1, p rho_n^p = rho_{n-1}: exponents r_0 = 0,
    /// r_n = (r_{n-1} + 1)/p, increasing to 1/(p-1).
    pub fn rho_n_val(&self, n: u64) -> Rat {
        let mut r = Rat::zero();
        let p = Rat::from(BigInt::from(self.p));
        for _ in 0..n {
            r = (r + Rat::one()) / &p;
        }
        r
    }

    /// Exponent of rho_{m-1} * ... * rho_1 = sum of the exponents.
    pub fn rho_product_val(&self, m: u64) -> Rat {
        let mut acc = Rat::zero();
        for k in 1..m {
            acc += self.rho_n_val(k);
        }
        acc
    }

    /// Smallest ramification index representing every radius the family
    /// needs down to sphere depth m: (p-1)^2 p^m.
    pub fn required_ramification(p: u64, max_m: u64) -> u64 {
        (p - 1) * (p - 1) * p.pow(max_m as u32)
    }
}

/// One member of the family: context, admitted perturbation, parameter,
/// and the cached conjugating fixed point h(lambda). Immutable once built.
#[derive(Clone, Debug)]
pub struct FamilyInstance {
    ctx: Context,
    constants: FamilyConstants,
    q: Series,
    lambda: Elem,
    h: Elem,
    conjugated: Series,
}

/// Solve Q*_lambda(z) = z near 1 by the certified Newton iteration on
/// p (Q*_lambda(z) - z), started at 1.
pub fn solve_fixed_point(ctx: &Context, q: &Series, lambda: &Elem) -> Result<Elem> {
    if q.max_index().is_none() && q.tail.is_none() {
        // Q = 0: P_lambda(1) = 1 exactly
        return Ok(Elem::one(ctx));
    }
    let p = ctx.p();
    let p_elem = Elem::from_integer(ctx, p as i64);
    // p (P_lambda(z) + Q(z) - z) has integral coefficients
    let scaled_family = Series::new(
        ctx,
        vec![
            (1, p_elem.neg()),
            (p, lambda.clone()),
            (p + 1, p_elem.sub(lambda)),
        ],
        None,
        q.domain_radius_val.clone(),
    )?;
    let mut scaled_q = Vec::new();
    for (&i, c) in q.coeffs() {
        scaled_q.push((i, c.mul(&p_elem)));
    }
    let scaled_q = Series::new(
        ctx,
        scaled_q,
        q.tail.as_ref().map(|t| crate::series::TailBound {
            from_index: t.from_index,
            base: &t.base + Rat::one(),
            slope: t.slope.clone(),
        }),
        q.domain_radius_val.clone(),
    )?;
    let f = scaled_family.add_series(&scaled_q)?;
    let out = hensel_lift(&f, &Elem::one(ctx)).map_err(|e| match e {
        // admission guarantees |f(1)| = |Q(1)|/p < 1 = |f'(1)|^2
        Error::HenselPreconditionFailed { .. } => Error::AdmissionFailed(
            "fixed point precondition failed despite admission".into(),
        ),
        e => e,
    })?;
    Ok(out.root)
}

impl FamilyInstance {
    pub fn new(ctx: &Context, q: Series, lambda: Elem, r_hat_val: Rat) -> Result<FamilyInstance> {
        let constants = FamilyConstants::new(ctx.p(), r_hat_val.clone())?;
        if q.domain_radius_val != r_hat_val {
            return Err(Error::AdmissionFailed(
                "perturbation domain does not match the outer ball".into(),
            ));
        }
        admit_perturbation(&q, &r_hat_val)?;
        // lambda in Lambda: |lambda - 1| < 1
        match lambda.sub(&Elem::one(ctx)).valuation()? {
            Valuation::Infinite => {}
            Valuation::Finite(v) => {
                if v <= Rat::zero() {
                    return Err(Error::AdmissionFailed(format!(
                        "lambda is not in the parameter disc: v(lambda - 1) = {v}"
                    )));
                }
            }
        }
        let h = solve_fixed_point(ctx, &q, &lambda)?;
        // |h - 1| <= |Q(1)|/p
        let hm1 = h.sub(&Elem::one(ctx));
        if let (Ok(Valuation::Finite(vh)), Ok(q1)) =
            (hm1.valuation(), q.eval(&Elem::one(ctx)))
        {
            if let Ok(Valuation::Finite(vq)) = q1.valuation() {
                assert!(
                    vh >= vq + Rat::one(),
                    "fixed point drifted outside the certified disc"
                );
            }
        }
        let conjugated = conjugate_series(ctx, &q, &lambda, &h, &r_hat_val)?;
        Ok(FamilyInstance {
            ctx: ctx.clone(),
            constants,
            q,
            lambda,
            h,
            conjugated,
        })
    }

    /// Same perturbation, new parameter (the search loop moves lambda a
    /// lot; h is re-solved and re-cached).
    pub fn with_lambda(&self, lambda: Elem) -> Result<FamilyInstance> {
        FamilyInstance::new(
            &self.ctx,
            self.q.clone(),
            lambda,
            self.constants.r_hat_val.clone(),
        )
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    pub fn constants(&self) -> &FamilyConstants {
        &self.constants
    }

    pub fn lambda(&self) -> &Elem {
        &self.lambda
    }

    /// The fixed point h(lambda) of Q*_lambda, cached at construction.
    pub fn fixed_point(&self) -> &Elem {
        &self.h
    }

    pub fn perturbation(&self) -> &Series {
        &self.q
    }

    /// The conjugated map Q_lambda as a series on B.
    pub fn conjugated_series(&self) -> &Series {
        &self.conjugated
    }

    /// Evaluate the conjugated map Q_lambda at a point of B.
    pub fn eval(&self, z: &Elem) -> Result<Elem> {
        let zv = self.ctx.pi_to_val(z.vlow_pi());
        if zv < self.constants.r_hat_val {
            match z.valuation()? {
                Valuation::Finite(v) if v < self.constants.r_hat_val => {
                    return Err(Error::AdmissionFailed(format!(
                        "point with valuation {v} outside B"
                    )));
                }
                _ => {}
            }
        }
        self.conjugated.eval(z)
    }

    /// z, Q(z), Q^2(z), ..., Q^n(z).
    pub fn orbit(&self, z: &Elem, n: u64) -> Result<Vec<Elem>> {
        let mut out = Vec::with_capacity(n as usize + 1);
        out.push(z.clone());
        for _ in 0..n {
            let next = self.eval(out.last().unwrap())?;
            out.push(next);
        }
        Ok(out)
    }
}

/// Q_lambda(z) = P_lambda(A(z)) + Q(A(z)) + 1 - h with A(z) = z + h - 1.
fn conjugate_series(
    ctx: &Context,
    q: &Series,
    lambda: &Elem,
    h: &Elem,
    r_hat_val: &Rat,
) -> Result<Series> {
    let shift = h.sub(&Elem::one(ctx));
    let p_series = p_family_series(ctx, lambda, r_hat_val.clone());
    let p_shifted = p_series.recenter(&shift)?;
    let q_shifted = q.recenter(&shift)?;
    let sum = p_shifted.add_series(&q_shifted)?;
    Ok(sum.sub_const(&shift))
}

/// Direct evaluation of P_lambda (the unperturbed family).
pub fn p_family_eval(ctx: &Context, lambda: &Elem, z: &Elem) -> Result<Elem> {
    p_family_series(ctx, lambda, Rat::from(BigInt::from(-1))).eval(z)
}

/// Where a point sits relative to the family's invariant regions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Region {
    /// |z| <= rho: the invariant ball.
    FixedBall,
    /// rho < |z| < 1.
    Annulus,
    /// |z - 1| < 1.
    NearOne,
    /// |z| = |z - 1| = 1: one application lands outside the unit ball.
    EscapeSphere,
    /// 1 < |z| <= r_hat.
    Outside,
}

/// The exact valuation relation predicted for the image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RegionPrediction {
    /// v(Q_lambda(z)) equals the exponent.
    ImageValEquals(Rat),
    /// v(Q_lambda(z)) >= rho exponent (fixed ball).
    ImageValAtLeast(Rat),
    /// v(Q_lambda(z) - 1) equals the exponent (Infinite for z = 1).
    ImageMinusOneVal(Valuation),
}

/// Classify z by exact valuation comparisons and return the predicted
/// exact valuation relation for Q_lambda(z), checkable against `eval`.
pub fn region_classify(
    inst: &FamilyInstance,
    z: &Elem,
) -> Result<(Region, RegionPrediction)> {
    let c = inst.constants();
    let p = BigInt::from(c.p);
    let vz = z.valuation()?;
    match vz {
        Valuation::Infinite => Ok((
            Region::FixedBall,
            RegionPrediction::ImageValAtLeast(c.rho_val.clone()),
        )),
        Valuation::Finite(v) => {
            if v >= c.rho_val {
                Ok((
                    Region::FixedBall,
                    RegionPrediction::ImageValAtLeast(c.rho_val.clone()),
                ))
            } else if v > Rat::zero() {
                Ok((
                    Region::Annulus,
                    RegionPrediction::ImageValEquals(Rat::from(p) * &v - Rat::one()),
                ))
            } else if v == Rat::zero() {
                let v1 = z.sub(&Elem::one(&inst.ctx)).valuation()?;
                match v1 {
                    Valuation::Infinite => Ok((
                        Region::NearOne,
                        RegionPrediction::ImageMinusOneVal(Valuation::Infinite),
                    )),
                    Valuation::Finite(w) if w > Rat::zero() => Ok((
                        Region::NearOne,
                        RegionPrediction::ImageMinusOneVal(Valuation::Finite(
                            w - Rat::one(),
                        )),
                    )),
                    _ => Ok((
                        Region::EscapeSphere,
                        RegionPrediction::ImageValEquals(-Rat::one()),
                    )),
                }
            } else if v >= c.r_hat_val {
                Ok((
                    Region::Outside,
                    RegionPrediction::ImageValEquals(
                        Rat::from(&p + BigInt::one()) * &v - Rat::one(),
                    ),
                ))
            } else {
                Err(Error::AdmissionFailed(format!(
                    "point with valuation {v} outside B"
                )))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ItineraryStatus {
    /// The horizon was reached with every iterate classified.
    AtHorizon,
    /// The orbit left the unit ball at the given step (points on the
    /// sphere |z| = |z-1| = 1 carry no symbol and resolve to the first
    /// step whose iterate has |.| > 1).
    Escaped(u64),
    /// The orbit entered the forward-invariant ball |z| <= rho at the
    /// given step; the remaining word is all zeros without iterating.
    FellToFixedBall(u64),
    PrecisionLoss(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ItineraryRecord {
    pub word: Vec<u8>,
    pub status: ItineraryStatus,
}

impl ItineraryRecord {
    /// "01101..." plus a status tag.
    pub fn to_compact_string(&self) -> String {
        let w: String = self.word.iter().map(|b| char::from(b'0' + b)).collect();
        let tag = match &self.status {
            ItineraryStatus::AtHorizon => "at-horizon".to_string(),
            ItineraryStatus::Escaped(n) => format!("escaped@{n}"),
            ItineraryStatus::FellToFixedBall(n) => format!("fixed-ball@{n}"),
            ItineraryStatus::PrecisionLoss(n) => format!("precision-loss@{n}"),
        };
        format!("{w} [{tag}]")
    }
}

/// The {0,1} coding of the orbit: word[n] = 0 iff Q^n(z) in B_1(0),
/// 1 iff in B_1(1).
pub fn itinerary(inst: &FamilyInstance, z: &Elem, horizon: u64) -> ItineraryRecord {
    let ctx = inst.context();
    let rho_v = inst.constants().rho_val.clone();
    let mut word: Vec<u8> = Vec::new();
    let mut cur = z.clone();
    let mut pending_escape = false;
    let mut n = 0u64;
    while n < horizon {
        let vz = match cur.valuation() {
            Ok(v) => v,
            Err(_) => {
                return ItineraryRecord {
                    word,
                    status: ItineraryStatus::PrecisionLoss(n),
                }
            }
        };
        let in_b0 = match &vz {
            Valuation::Infinite => true,
            Valuation::Finite(v) => *v > Rat::zero(),
        };
        if in_b0 {
            if pending_escape {
                // cannot happen: once outside the unit ball the orbit
                // only grows; defensive classification
                return ItineraryRecord {
                    word,
                    status: ItineraryStatus::PrecisionLoss(n),
                };
            }
            let falls = match &vz {
                Valuation::Infinite => true,
                Valuation::Finite(v) => *v >= rho_v,
            };
            if falls {
                // forward-invariant ball: the tail is all zeros
                while (word.len() as u64) < horizon {
                    word.push(0);
                }
                return ItineraryRecord {
                    word,
                    status: ItineraryStatus::FellToFixedBall(n),
                };
            }
            word.push(0);
        } else {
            let strayed = match &vz {
                Valuation::Finite(v) => *v < Rat::zero(),
                Valuation::Infinite => false,
            };
            if strayed {
                return ItineraryRecord {
                    word,
                    status: ItineraryStatus::Escaped(n),
                };
            }
            // |z| = 1: distinguish B_1(1) from the escape sphere
            let v1 = match cur.sub(&Elem::one(ctx)).valuation() {
                Ok(v) => v,
                Err(_) => {
                    return ItineraryRecord {
                        word,
                        status: ItineraryStatus::PrecisionLoss(n),
                    }
                }
            };
            let in_b1 = match &v1 {
                Valuation::Infinite => true,
                Valuation::Finite(v) => *v > Rat::zero(),
            };
            if in_b1 {
                word.push(1);
            } else {
                // escape sphere: no symbol; the next iterates leave the
                // unit ball
                pending_escape = true;
            }
        }
        cur = match inst.eval(&cur) {
            Ok(next) => next,
            Err(Error::AdmissionFailed(_)) => {
                return ItineraryRecord {
                    word,
                    status: ItineraryStatus::Escaped(n + 1),
                }
            }
            Err(_) => {
                return ItineraryRecord {
                    word,
                    status: ItineraryStatus::PrecisionLoss(n),
                }
            }
        };
        n += 1;
    }
    ItineraryRecord {
        word,
        status: ItineraryStatus::AtHorizon,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KMembership {
    InKUpToHorizon,
    Escaped(u64),
}

/// Forward iteration with escape detection from B; membership is
/// semi-decidable so the positive answer is horizon-qualified.
pub fn filled_julia_member(
    inst: &FamilyInstance,
    z: &Elem,
    horizon: u64,
) -> Result<KMembership> {
    let c = inst.constants();
    let mut cur = z.clone();
    for n in 0..=horizon {
        match cur.valuation()? {
            Valuation::Infinite => return Ok(KMembership::InKUpToHorizon),
            Valuation::Finite(v) => {
                if v < c.r_hat_val {
                    return Ok(KMembership::Escaped(n));
                }
                if v >= c.rho_val {
                    // forward-invariant: never leaves
                    return Ok(KMembership::InKUpToHorizon);
                }
            }
        }
        if n < horizon {
            cur = match inst.eval(&cur) {
                Ok(x) => x,
                Err(Error::AdmissionFailed(_)) => return Ok(KMembership::Escaped(n + 1)),
                Err(e) => return Err(e),
            };
        }
    }
    Ok(KMembership::InKUpToHorizon)
}

// ----- constructed samplers and the estimate verifier -----

/// A random unit-leading element of exact pi-valuation `val_pi`.
pub fn random_with_val(ctx: &Context, rng: &mut ChaCha8Rng, val_pi: i64, digits: u64) -> Elem {
    use crate::padic::FqElem;
    let q = ctx.fq().order();
    let mut ds = vec![FqElem::decode(1 + rng.gen_range(0..q - 1), ctx.p(), ctx.f())];
    for _ in 1..digits {
        ds.push(FqElem::decode(rng.gen_range(0..q), ctx.p(), ctx.f()));
    }
    Elem::from_digits(ctx, val_pi, &ds, val_pi + digits as i64)
}

/// A random parameter in Lambda = {|lambda - 1| < 1} with v(lambda-1) =
/// `dist_pi`.
pub fn random_lambda(ctx: &Context, rng: &mut ChaCha8Rng, dist_pi: i64, digits: u64) -> Elem {
    Elem::one(ctx).add(&random_with_val(ctx, rng, dist_pi, digits))
}

#[derive(Clone, Debug)]
pub struct LemmaReport {
    pub name: String,
    pub samples: u64,
    pub violations: Vec<String>,
    pub precision_losses: u64,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct EstimateReport {
    pub lemmas: Vec<LemmaReport>,
}

impl EstimateReport {
    pub fn all_passed(&self) -> bool {
        self.lemmas.iter().all(LemmaReport::passed)
    }
}

fn val_of(e: &Elem) -> Result<Rat> {
    match e.valuation()? {
        Valuation::Finite(v) => Ok(v),
        Valuation::Infinite => Err(Error::PrecisionLoss("exact zero where nonzero expected".into())),
    }
}

/// Exact-verify the local estimates on constructed hypothesis-satisfying
/// samples:
///
/// * contraction through a zeros-sphere and exact p-expansion near 1,
/// * the parameter derivative of the unperturbed family on both balls,
/// * the p^M scaling of parameter differences along a ones-block,
/// * the parameter isometry after a zeros-block,
/// * the Lipschitz bound on the conjugating fixed point.
pub fn verify_local_estimates(
    inst: &FamilyInstance,
    count: u64,
    max_m: u64,
    seed: u64,
) -> Result<EstimateReport> {
    use rand::SeedableRng;
    let ctx = inst.context().clone();
    let c = inst.constants().clone();
    let e = ctx.e() as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s_pi = ctx.val_to_pi(&c.s_val)?;
    // digit window wide enough that constructed differences stay visible
    let w = 30 * ctx.e();
    let mut lemmas = Vec::new();

    // 1) sphere contraction: |Q(z0)-Q(z1)| <= rho_{m-1} |z0-z1|
    {
        let mut rep = LemmaReport {
            name: "sphere_contraction".into(),
            samples: 0,
            violations: Vec::new(),
            precision_losses: 0,
        };
        for _ in 0..count {
            let m = 1 + rng.gen_range(0..max_m);
            let rm_pi = ctx.val_to_pi(&c.rho_n_val(m))?;
            let z0 = random_with_val(&ctx, &mut rng, rm_pi, w);
            let extra = rng.gen_range(0..4) * e;
            let delta = random_with_val(&ctx, &mut rng, s_pi + extra, w);
            let z1 = z0.add(&delta);
            rep.samples += 1;
            let lhs = inst.eval(&z0).and_then(|a| Ok(a.sub(&inst.eval(&z1)?)));
            match lhs {
                Ok(diff) => {
                    let need = c.rho_n_val(m - 1) + val_of(&delta).unwrap();
                    let got = ctx.pi_to_val(diff.vlow_pi());
                    if got < need {
                        rep.violations.push(format!(
                            "m={m}: v(diff) = {got} < {need} (delta v = {})",
                            val_of(&delta).unwrap()
                        ));
                    }
                }
                Err(_) => rep.precision_losses += 1,
            }
        }
        lemmas.push(rep);
    }

    // 2) exact expansion near 1: |Q(z0)-Q(z1)| = p |z0-z1|
    {
        let mut rep = LemmaReport {
            name: "ones_expansion".into(),
            samples: 0,
            violations: Vec::new(),
            precision_losses: 0,
        };
        for _ in 0..count {
            let one = Elem::one(&ctx);
            let d0 = e * rng.gen_range(1..4);
            let z0 = one.add(&random_with_val(&ctx, &mut rng, d0, w));
            let d1 = e * rng.gen_range(1..4);
            let z1 = one.add(&random_with_val(&ctx, &mut rng, d1, w));
            rep.samples += 1;
            let d = z0.sub(&z1);
            let vd = match d.valuation() {
                Ok(Valuation::Finite(v)) => v,
                _ => {
                    rep.precision_losses += 1;
                    continue;
                }
            };
            match (inst.eval(&z0), inst.eval(&z1)) {
                (Ok(a), Ok(b)) => match a.sub(&b).valuation() {
                    Ok(Valuation::Finite(got)) => {
                        let want = &vd - Rat::one();
                        if got != want {
                            rep.violations
                                .push(format!("v(diff) = {got}, expected {want}"));
                        }
                    }
                    _ => rep.precision_losses += 1,
                },
                _ => rep.precision_losses += 1,
            }
        }
        lemmas.push(rep);
    }

    // 3) parameter derivative of the plain family on both balls:
    //    v(P_l0(z) - P_l1(z)) = v(dl) - 1 + p v(z) + v(1 - z)
    {
        let mut rep = LemmaReport {
            name: "family_parameter_derivative".into(),
            samples: 0,
            violations: Vec::new(),
            precision_losses: 0,
        };
        for k in 0..count {
            let d0 = e * rng.gen_range(1..3);
            let l0 = random_lambda(&ctx, &mut rng, d0, w);
            let d1 = e * rng.gen_range(1..4);
            let l1 = l0.add(&random_with_val(&ctx, &mut rng, d1, w));
            let zdepth = rng.gen_range(1..=2 * e);
            let z = if k % 2 == 0 {
                // B_0 sample
                random_with_val(&ctx, &mut rng, zdepth, w)
            } else {
                // B_1 sample
                Elem::one(&ctx).add(&random_with_val(&ctx, &mut rng, zdepth, w))
            };
            rep.samples += 1;
            let lhs = p_family_eval(&ctx, &l0, &z)
                .unwrap()
                .sub(&p_family_eval(&ctx, &l1, &z).unwrap());
            let vdl = val_of(&l0.sub(&l1)).unwrap();
            let vz = val_of(&z);
            let v1z = Elem::one(&ctx).sub(&z).valuation();
            match (lhs.valuation(), vz, v1z) {
                (Ok(Valuation::Finite(got)), Ok(vz), Ok(Valuation::Finite(v1z))) => {
                    let want = &vdl - Rat::one()
                        + Rat::from(BigInt::from(c.p)) * vz
                        + v1z;
                    if got != want {
                        rep.violations
                            .push(format!("v = {got}, expected {want}"));
                    }
                }
                _ => rep.precision_losses += 1,
            }
        }
        lemmas.push(rep);
    }

    // 4) ones-block scaling: x_i in the closed p^{-M} ball at 1 and
    //    |dl| = |x0 - x1| give v(Q^M_{l0}(x0) - Q^M_{l1}(x1)) = v(dl) - M
    {
        let mut rep = LemmaReport {
            name: "ones_block_parameter_scaling".into(),
            samples: 0,
            violations: Vec::new(),
            precision_losses: 0,
        };
        for _ in 0..count {
            let m_block = 1 + rng.gen_range(0..2u64);
            let depth = (m_block as i64) * e + rng.gen_range(0..2) * e;
            let x0 = Elem::one(&ctx).add(&random_with_val(&ctx, &mut rng, depth, w));
            let sep = depth + rng.gen_range(1..4) * e;
            let x1 = x0.add(&random_with_val(&ctx, &mut rng, sep, w));
            let dx = x0.sub(&x1);
            let vdx_pi = dx.val_pi().unwrap().unwrap();
            let l0 = inst.lambda().clone();
            let l1 = l0.add(&random_with_val(&ctx, &mut rng, vdx_pi, w));
            rep.samples += 1;
            let inst1 = match inst.with_lambda(l1.clone()) {
                Ok(i) => i,
                Err(_) => {
                    rep.precision_losses += 1;
                    continue;
                }
            };
            let a = inst.orbit(&x0, m_block);
            let b = inst1.orbit(&x1, m_block);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    let d = a.last().unwrap().sub(b.last().unwrap());
                    match d.valuation() {
                        Ok(Valuation::Finite(got)) => {
                            let want = ctx.pi_to_val(vdx_pi)
                                - Rat::from(BigInt::from(m_block));
                            if got != want {
                                rep.violations.push(format!(
                                    "M={m_block}: v = {got}, expected {want}"
                                ));
                            }
                        }
                        _ => rep.precision_losses += 1,
                    }
                }
                _ => rep.precision_losses += 1,
            }
        }
        lemmas.push(rep);
    }

    // 5) zeros-block isometry: |x_i| = rho_m, |x0-x1| <= S and
    //    rho_{m-1}...rho_1 |x0-x1| < |dl| <= S give
    //    v(Q^m_{l0}(x0) - Q^m_{l1}(x1)) = v(dl)
    {
        let mut rep = LemmaReport {
            name: "zeros_block_parameter_isometry".into(),
            samples: 0,
            violations: Vec::new(),
            precision_losses: 0,
        };
        for _ in 0..count {
            let m = 1 + rng.gen_range(0..max_m);
            let rm_pi = ctx.val_to_pi(&c.rho_n_val(m))?;
            let x0 = random_with_val(&ctx, &mut rng, rm_pi, w);
            let dx_extra = rng.gen_range(2..6) * e;
            let dx_pi = s_pi + dx_extra;
            let x1 = x0.add(&random_with_val(&ctx, &mut rng, dx_pi, w));
            // strict window: prod + v(dx) > v(dl) >= v(S)
            let prod = c.rho_product_val(m);
            let upper = ctx.val_to_pi(&crate::series::floor_to_grid(
                &(&prod + ctx.pi_to_val(dx_pi)),
                ctx.e(),
            ))?;
            if upper <= s_pi {
                continue;
            }
            let dl_pi = rng.gen_range(s_pi..upper);
            let l0 = inst.lambda().clone();
            let l1 = l0.add(&random_with_val(&ctx, &mut rng, dl_pi, w));
            rep.samples += 1;
            let inst1 = match inst.with_lambda(l1) {
                Ok(i) => i,
                Err(_) => {
                    rep.precision_losses += 1;
                    continue;
                }
            };
            match (inst.orbit(&x0, m), inst1.orbit(&x1, m)) {
                (Ok(a), Ok(b)) => {
                    let d = a.last().unwrap().sub(b.last().unwrap());
                    match d.valuation() {
                        Ok(Valuation::Finite(got)) => {
                            let want = ctx.pi_to_val(dl_pi);
                            if got != want {
                                rep.violations
                                    .push(format!("m={m}: v = {got}, expected {want}"));
                            }
                        }
                        _ => rep.precision_losses += 1,
                    }
                }
                _ => rep.precision_losses += 1,
            }
        }
        lemmas.push(rep);
    }

    // 6) fixed-point Lipschitz bound: |h(l0) - h(l1)| <= rho |l0 - l1|
    {
        let mut rep = LemmaReport {
            name: "fixed_point_lipschitz".into(),
            samples: 0,
            violations: Vec::new(),
            precision_losses: 0,
        };
        for _ in 0..count.min(60) {
            let d0 = e * rng.gen_range(1..3);
            let l0 = random_lambda(&ctx, &mut rng, d0, w);
            let d1 = e * rng.gen_range(1..4);
            let l1 = l0.add(&random_with_val(&ctx, &mut rng, d1, w));
            rep.samples += 1;
            let (h0, h1) = match (
                solve_fixed_point(&ctx, inst.perturbation(), &l0),
                solve_fixed_point(&ctx, inst.perturbation(), &l1),
            ) {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    rep.precision_losses += 1;
                    continue;
                }
            };
            let vdl = val_of(&l0.sub(&l1)).unwrap();
            let need = &vdl + &c.rho_val;
            let got = ctx.pi_to_val(h0.sub(&h1).vlow_pi());
            if got < need {
                rep.violations
                    .push(format!("v(dh) = {got} < {need}"));
            }
        }
        lemmas.push(rep);
    }

    Ok(EstimateReport { lemmas })
}

/// Degree of the conjugated map on B (a polynomial-like map of degree
/// p + 1 for every admitted instance).
pub fn family_map_degree(inst: &FamilyInstance) -> Result<u64> {
    let ball = UltraBall::closed(
        Elem::zero(inst.context()),
        inst.constants().r_hat_val.clone(),
    );
    map_degree(inst.conjugated_series(), &ball)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{rat, rat_int};
    use rand::SeedableRng;

    fn q_zero(ctx: &Context) -> Series {
        Series::zero(ctx, rat_int(-1))
    }

    fn instance_q0(ctx: &Context, lambda: Elem) -> FamilyInstance {
        FamilyInstance::new(ctx, q_zero(ctx), lambda, rat_int(-1)).unwrap()
    }

    #[test]
    fn constants_recursion_and_closed_form() {
        for p in [2u64, 3, 5] {
            let c = FamilyConstants::new(p, rat_int(-1)).unwrap();
            assert_eq!(c.rho_n_val(0), rat_int(0));
            // closed form r_n = (1 - p^{-n})/(p-1) and monotone approach to rho
            for n in 1..=6u64 {
                let pn = BigInt::from(p).pow(n as u32);
                let closed = Rat::new(
                    &pn - BigInt::one(),
                    pn * BigInt::from(p - 1),
                );
                assert_eq!(c.rho_n_val(n), closed);
                assert!(c.rho_n_val(n) > c.rho_n_val(n - 1));
                assert!(c.rho_n_val(n) < c.rho_val);
            }
            // p S^{p-1} = rho and S < rho as exponents
            let lhs = Rat::from(BigInt::from(p - 1)) * &c.s_val - Rat::one();
            assert_eq!(lhs, c.rho_val);
            assert!(c.s_val > c.rho_val);
        }
    }

    #[test]
    fn family_eval_examples() {
        let ctx = Context::new(3, 1, 1, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let d = 1 + rng.gen_range(0..3);
            let l = random_lambda(&ctx, &mut rng, d, 12);
            let y = p_family_eval(&ctx, &l, &Elem::one(&ctx)).unwrap();
            assert!(y.sub(&Elem::one(&ctx)).is_zero_at_prec());
            assert!(p_family_eval(&ctx, &l, &Elem::zero(&ctx))
                .unwrap()
                .is_exact_zero());
        }
        let y = p_family_eval(&ctx, &Elem::one(&ctx), &Elem::from_integer(&ctx, -1)).unwrap();
        assert!(y.sub(&Elem::from_rational(&ctx, rat(1, 3))).is_exact_zero());
    }

    #[test]
    fn fixed_point_unperturbed_is_one() {
        let ctx = Context::new(2, 1, 2, 60).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let d = 1 + rng.gen_range(0..5);
            let l = random_lambda(&ctx, &mut rng, d, 16);
            let inst = instance_q0(&ctx, l);
            assert!(inst.fixed_point().sub(&Elem::one(&ctx)).is_exact_zero());
        }
    }

    #[test]
    fn fixed_point_perturbed_oracle() {
        // p = 2, Q = 4, lambda = 1: brute-force root of z^3 + z^2 - 2z + 8
        // near 1 mod 2^6
        let mut oracle = Vec::new();
        for z in 0..64i64 {
            if (z * z * z + z * z - 2 * z + 8).rem_euclid(64) == 0 && (z - 1).rem_euclid(2) == 0 {
                oracle.push(z);
            }
        }
        assert!(oracle.contains(&41));
        let ctx = Context::new(2, 1, 1, 60).unwrap();
        let q = Series::constant(&ctx, Elem::from_integer(&ctx, 4), rat_int(-1));
        let inst = FamilyInstance::new(&ctx, q.clone(), Elem::one(&ctx), rat_int(-1)).unwrap();
        let h = inst.fixed_point();
        let d = h.sub(&Elem::from_integer(&ctx, 41));
        assert!(
            d.is_zero_at_prec() || d.valuation().unwrap().finite().unwrap() >= &rat_int(6),
            "h = {}",
            h.digit_string()
        );
        // |h - 1| = |40| = 2^{-3} <= |Q(1)|/p
        assert_eq!(
            h.sub(&Elem::one(&ctx)).valuation().unwrap(),
            Valuation::Finite(rat_int(3))
        );
        // bound |h(lambda) - 1| <= 1/8 over sampled lambda
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..15 {
            let d = 1 + rng.gen_range(0..4);
            let l = random_lambda(&ctx, &mut rng, d, 16);
            let inst = inst.with_lambda(l).unwrap();
            let v = inst
                .fixed_point()
                .sub(&Elem::one(&ctx))
                .valuation()
                .unwrap();
            assert!(v.finite().unwrap() >= &rat_int(3));
        }
    }

    #[test]
    fn conjugated_map_fixes_one() {
        let ctx = Context::new(2, 1, 1, 60).unwrap();
        let q = Series::constant(&ctx, Elem::from_integer(&ctx, 4), rat_int(-1));
        let inst = FamilyInstance::new(&ctx, q, Elem::one(&ctx), rat_int(-1)).unwrap();
        let y = inst.eval(&Elem::one(&ctx)).unwrap();
        let d = y.sub(&Elem::one(&ctx));
        // exact up to the precision h carries
        assert!(
            d.is_zero_at_prec()
                || d.valuation().unwrap().finite().unwrap() >= &rat_int(40)
        );
        // |Q_lambda'(1)| = p
        let deriv = inst.conjugated_series().derivative();
        let dv = deriv.eval(&Elem::one(&ctx)).unwrap().valuation().unwrap();
        assert_eq!(dv, Valuation::Finite(rat_int(-1)));
    }

    #[test]
    fn conjugated_reduces_to_family_when_unperturbed() {
        let ctx = Context::new(3, 1, 1, 40).unwrap();
        let inst = instance_q0(&ctx, Elem::one(&ctx));
        let z = Elem::from_integer(&ctx, -1);
        let a = inst.eval(&z).unwrap();
        let b = p_family_eval(&ctx, &Elem::one(&ctx), &z).unwrap();
        assert!(a.sub(&b).is_exact_zero());
        assert_eq!(a.valuation().unwrap(), Valuation::Finite(rat_int(-1)));
    }

    #[test]
    fn region_classification_examples() {
        // p=3: |z| = rho_1 = 3^{-1/3} is in the annulus with |Q(z)| = 1
        let ctx = Context::new(3, 1, 3, 60).unwrap();
        let inst = instance_q0(&ctx, Elem::one(&ctx));
        let z = Elem::uniformizer_pow(&ctx, 1);
        let (region, pred) = region_classify(&inst, &z).unwrap();
        assert_eq!(region, Region::Annulus);
        assert_eq!(pred, RegionPrediction::ImageValEquals(rat_int(0)));
        let got = inst.eval(&z).unwrap().valuation().unwrap();
        assert_eq!(got, Valuation::Finite(rat_int(0)));

        // |z| <= rho stays in the fixed ball
        let z = Elem::uniformizer_pow(&ctx, 2); // v = 2/3 >= 1/2
        let (region, pred) = region_classify(&inst, &z).unwrap();
        assert_eq!(region, Region::FixedBall);
        assert_eq!(pred, RegionPrediction::ImageValAtLeast(rat(1, 2)));
        let got = inst.eval(&z).unwrap().valuation().unwrap();
        assert!(got.finite().unwrap() >= &rat(1, 2));

        // z = -1: escape sphere with |Q(z)| = 3
        let z = Elem::from_integer(&ctx, -1);
        let (region, pred) = region_classify(&inst, &z).unwrap();
        assert_eq!(region, Region::EscapeSphere);
        assert_eq!(pred, RegionPrediction::ImageValEquals(rat_int(-1)));
        assert_eq!(
            inst.eval(&z).unwrap().valuation().unwrap(),
            Valuation::Finite(rat_int(-1))
        );
    }

    #[test]
    fn itinerary_examples() {
        let ctx = Context::new(3, 1, 3, 60).unwrap();
        let inst = instance_q0(&ctx, Elem::one(&ctx));
        // z = 1 is fixed: all ones
        let rec = itinerary(&inst, &Elem::one(&ctx), 8);
        assert_eq!(rec.word, vec![1; 8]);
        assert_eq!(rec.status, ItineraryStatus::AtHorizon);
        // z = 0 falls into the fixed ball immediately
        let rec = itinerary(&inst, &Elem::zero(&ctx), 6);
        assert_eq!(rec.word, vec![0; 6]);
        assert_eq!(rec.status, ItineraryStatus::FellToFixedBall(0));
        // z = -1 sits on the escape sphere; the image has |.| = 3
        let rec = itinerary(&inst, &Elem::from_integer(&ctx, -1), 6);
        assert_eq!(rec.word, Vec::<u8>::new());
        assert_eq!(rec.status, ItineraryStatus::Escaped(1));
    }

    #[test]
    fn filled_julia_examples() {
        let ctx = Context::new(3, 1, 3, 60).unwrap();
        let inst = instance_q0(&ctx, Elem::one(&ctx));
        assert_eq!(
            filled_julia_member(&inst, &Elem::one(&ctx), 10).unwrap(),
            KMembership::InKUpToHorizon
        );
        assert_eq!(
            filled_julia_member(&inst, &Elem::zero(&ctx), 10).unwrap(),
            KMembership::InKUpToHorizon
        );
        // 1 < |z| < r_hat escapes within the growth bound
        let z = Elem::uniformizer_pow(&ctx, -1); // v = -1/3
        match filled_julia_member(&inst, &z, 10).unwrap() {
            KMembership::Escaped(n) => assert!(n <= 2, "escaped at {n}"),
            other => panic!("expected escape, got {other:?}"),
        }
    }

    #[test]
    fn sphere_radius_forces_zero_prefix() {
        // |z| = rho_n forces itinerary 0^n and no 1 before step n
        let ctx = Context::new(2, 1, 8, 120).unwrap();
        let inst = instance_q0(&ctx, Elem::one(&ctx));
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for n in 1..=3u64 {
            let rn_pi = ctx.val_to_pi(&inst.constants().rho_n_val(n)).unwrap();
            for _ in 0..10 {
                let z = random_with_val(&ctx, &mut rng, rn_pi, 40);
                let rec = itinerary(&inst, &z, n + 2);
                assert!(rec.word.len() as u64 >= n, "word: {rec:?}");
                for k in 0..n as usize {
                    assert_eq!(rec.word[k], 0, "n={n}, word {:?}", rec.word);
                }
                if let Some(first_one) = rec.word.iter().position(|&b| b == 1) {
                    assert!(first_one as u64 >= n);
                }
            }
        }
    }

    #[test]
    fn fixed_ball_disc_has_constant_itinerary() {
        let ctx = Context::new(2, 1, 2, 60).unwrap();
        let inst = instance_q0(&ctx, Elem::one(&ctx));
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        // a disc inside the invariant ball: every point codes to all zeros
        let center = random_with_val(&ctx, &mut rng, 2, 20);
        let reference = itinerary(&inst, &center, 10).word;
        for _ in 0..20 {
            let y = center.add(&random_with_val(&ctx, &mut rng, 6, 20));
            assert_eq!(itinerary(&inst, &y, 10).word, reference);
        }
    }

    #[test]
    fn local_estimates_hold_on_samples() {
        for (p, e) in [(2u64, 8), (3u64, 108)] {
            let ctx = Context::new(p, 1, e, (e as i64) * 40).unwrap();
            let q0 = Series::zero(&ctx, rat_int(-1));
            let inst = FamilyInstance::new(&ctx, q0, Elem::one(&ctx), rat_int(-1)).unwrap();
            let report = verify_local_estimates(&inst, 24, 3, 2024).unwrap();
            for lem in &report.lemmas {
                assert!(
                    lem.passed(),
                    "p={p}: {} violated: {:?}",
                    lem.name,
                    lem.violations
                );
            }
            // perturbed instance
            let qp = Series::constant(
                &ctx,
                Elem::from_integer(&ctx, (p * p) as i64),
                rat_int(-1),
            );
            let inst = FamilyInstance::new(&ctx, qp, Elem::one(&ctx), rat_int(-1)).unwrap();
            let report = verify_local_estimates(&inst, 16, 2, 4857).unwrap();
            for lem in &report.lemmas {
                assert!(
                    lem.passed(),
                    "p={p} perturbed: {} violated: {:?}",
                    lem.name,
                    lem.violations
                );
            }
        }
    }

    #[test]
    fn degree_is_p_plus_one() {
        for p in [2u64, 3] {
            let ctx = Context::new(p, 1, 2, 60).unwrap();
            let inst = FamilyInstance::new(
                &ctx,
                Series::zero(&ctx, rat_int(-1)),
                Elem::one(&ctx),
                rat_int(-1),
            )
            .unwrap();
            assert_eq!(family_map_degree(&inst).unwrap(), p + 1);
            let q = Series::constant(&ctx, Elem::from_integer(&ctx, (p * p) as i64), rat_int(-1));
            let inst = FamilyInstance::new(&ctx, q, Elem::one(&ctx), rat_int(-1)).unwrap();
            assert_eq!(family_map_degree(&inst).unwrap(), p + 1);
        }
    }
}
