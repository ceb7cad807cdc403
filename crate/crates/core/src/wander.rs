//! The constructive wandering-disc machinery: schedules, seed points, the
//! inductive parameter-selection step, the full search loop, and
//! independent certificate verification.
//!
//! A depth-d run fixes block lengths (m_i, M_i), i < d, builds a seed x
//! with |x| = rho_{m_0} whose orbit reaches the repelling fixed point to a
//! measured depth, and then repeatedly moves the parameter so the orbit of
//! x realizes the prefix 0^{m_0} 1^{M_0} ... 0^{m_{d-1}} 1^{M_{d-1}}.
//! Stage j solves two parameter equations by digit descent - an orbit zero
//! (scaled isometry p^{M_{j-1}}) and a sphere landing on 1 (isometry) -
//! both of which have unique solutions in the complete field K, so every
//! parameter digit is forced and certificates are bit-reproducible.
//!
//! The z-side preimage equations are wildly ramified and generally leave
//! the fixed field K; seed residuals therefore bottom out at a measured
//! depth g instead of the working precision. The stage machinery only
//! needs g > M_0 - 1 (the ones-block must survive M_0 - 1 doubling steps),
//! which the construction checks exactly and records in the certificate.

use crate::analysis::solve_on_sphere;
use crate::dynamics::{itinerary, FamilyInstance};
use crate::error::{Error, Result};
use crate::padic::elem::{fmt_rat, parse_rat};
use crate::padic::{Context, Elem, FqElem, Rat, UltraBall, Valuation};
use crate::series::Series;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

// ----- schedules -----

/// Block lengths of the target itinerary. Entry i pairs the zeros-block
/// m_i with the ones-block M_i that follows it; the wandering condition
/// couples them through rho_{m_i-1} ... rho_1 p^{M_i} <= 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub p: u64,
    pub m: Vec<u64>,
    pub big_m: Vec<u64>,
}

impl Schedule {
    /// N_0 = 0, N_{i+1} = N_i + m_i + M_i.
    pub fn checkpoints(&self) -> Vec<u64> {
        let mut out = vec![0u64];
        for i in 0..self.m.len() {
            out.push(out[i] + self.m[i] + self.big_m[i]);
        }
        out
    }

    /// Total verified prefix length N_d.
    pub fn prefix_len(&self) -> u64 {
        *self.checkpoints().last().unwrap()
    }

    /// The word 0^{m_0} 1^{M_0} ... as a byte vector.
    pub fn word(&self) -> Vec<u8> {
        let mut w = Vec::new();
        for i in 0..self.m.len() {
            w.extend(std::iter::repeat_n(0u8, self.m[i] as usize));
            w.extend(std::iter::repeat_n(1u8, self.big_m[i] as usize));
        }
        w
    }
}

fn ceil_rat(r: &Rat) -> i64 {
    let c = r.ceil().to_integer();
    i64::try_from(&c).expect("schedule bound in range")
}

/// Minimal schedule for the given depth: the smallest M_0 with
/// p^{-M_0} <= S, minimal increments with p^{-(M_{i+1}-M_i)} <= S, and for
/// each M_i the minimal m_i with sum_{k=1}^{m_i-1} r_k >= M_i.
pub fn schedule_sequences(p: u64, depth: u64) -> Schedule {
    let c = crate::dynamics::FamilyConstants::new(p, -Rat::one()).expect("constants");
    let step = ceil_rat(&c.s_val).max(1) as u64;
    let mut big_m = Vec::new();
    let mut m = Vec::new();
    for i in 0..depth {
        let mi = step * (i + 1);
        big_m.push(mi);
        let target = Rat::from(BigInt::from(mi));
        let mut cand = 1u64;
        let mut acc = Rat::zero();
        // acc = sum_{k=1}^{cand-1} r_k
        while acc < target {
            acc += c.rho_n_val(cand);
            cand += 1;
        }
        m.push(cand);
    }
    Schedule { p, m, big_m }
}

#[derive(Clone, Debug)]
pub struct ConditionWitness {
    pub index: usize,
    /// sum_{k=1}^{m_i - 1} r_k - M_i, nonnegative iff the condition holds.
    pub margin: Rat,
}

/// Exact verdict of the wandering condition per index.
pub fn check_wandering_condition(
    p: u64,
    m: &[u64],
    big_m: &[u64],
) -> Result<(bool, Vec<ConditionWitness>)> {
    if m.len() != big_m.len() {
        return Err(Error::ConditionViolated(
            "schedule lists have different lengths".into(),
        ));
    }
    let c = crate::dynamics::FamilyConstants::new(p, -Rat::one())?;
    let mut all = true;
    let mut wit = Vec::new();
    for (i, (&mi, &bmi)) in m.iter().zip(big_m.iter()).enumerate() {
        let margin = c.rho_product_val(mi) - Rat::from(BigInt::from(bmi));
        if margin < Rat::zero() {
            all = false;
        }
        wit.push(ConditionWitness { index: i, margin });
    }
    Ok((all, wit))
}

// ----- the shared isometric digit solver -----

/// Solve eval(w) = target on a disc around `start` on which eval scales
/// valuations by exactly `shift_pi`: v_pi(eval(a) - eval(b)) =
/// v_pi(a - b) + shift_pi. Every digit of the solution is forced, so the
/// descent is deterministic; it errs if a correction would leave the disc
/// (v_pi < min_corr_pi).
fn isometric_solve(
    eval: &mut dyn FnMut(&Elem) -> Result<Elem>,
    start: &Elem,
    target: &Elem,
    shift_pi: i64,
    min_corr_pi: i64,
    goal_pi: i64,
) -> Result<Elem> {
    let ctx = start.context().clone();
    let mut w = start.clone();
    let mut r = eval(&w)?.sub(target);
    for _ in 0..128 {
        let v_r = match r.val_pi() {
            Ok(Some(v)) => v,
            // residual indistinguishable from zero: done
            _ => return Ok(w),
        };
        if v_r >= goal_pi {
            return Ok(w);
        }
        let corr_v = v_r - shift_pi;
        if corr_v < min_corr_pi {
            return Err(Error::ConditionViolated(format!(
                "correction at pi^{corr_v} leaves the isometry disc (min pi^{min_corr_pi})"
            )));
        }
        // secant probe at the correction scale
        let probe = w.add(&Elem::digit_monomial(&ctx, corr_v, &FqElem::from_scalar(1)));
        let slope = eval(&probe)?
            .sub(&eval(&w)?)
            .mul_pi_pow(-corr_v);
        let correction = r.div(&slope)?;
        let w2 = w.sub(&correction);
        let r2 = eval(&w2)?.sub(target);
        let progressed = match r2.val_pi() {
            Ok(Some(v2)) => v2 > v_r,
            _ => true,
        };
        if !progressed {
            return Err(Error::PrecisionLoss(
                "isometric descent stalled without progress".into(),
            ));
        }
        w = w2;
        r = r2;
    }
    Err(Error::PrecisionLoss(
        "isometric descent exceeded the round budget".into(),
    ))
}

// ----- seed construction -----

#[derive(Clone, Debug)]
pub struct SeedPoint {
    pub x: Elem,
    /// Measured depth g = v(Q^{m0}(x) - 1); Infinite when the landing is
    /// exact to precision.
    pub residual_depth: Valuation,
}

/// Backward induction: y_{m0} = 1, then y_{k-1} from solve_on_sphere at
/// radius rho_{m0-k+1}. The hop roots generally stall at the
/// K-representability floor; the first (deterministic) root is taken each
/// time and the final landing depth is measured, not assumed.
pub fn seed_point(inst: &FamilyInstance, m0: u64) -> Result<SeedPoint> {
    let ctx = inst.context().clone();
    if m0 == 0 {
        return Ok(SeedPoint {
            x: Elem::one(&ctx),
            residual_depth: Valuation::Infinite,
        });
    }
    let series = inst.conjugated_series().clone();
    let mut target = Elem::one(&ctx);
    for depth in 1..=m0 {
        let r_v = inst.constants().rho_n_val(depth);
        let out = solve_on_sphere(&series, &target, &r_v, 1, None)?;
        let root = out
            .roots
            .first()
            .ok_or_else(|| Error::NoRootAtRadius(r_v.clone()))?;
        target = root.point.clone();
    }
    let x = target;
    let end = inst.orbit(&x, m0)?.pop().unwrap();
    let residual_depth = match end.sub(&Elem::one(&ctx)).valuation() {
        Ok(v) => v,
        Err(_) => Valuation::Finite(ctx.pi_to_val(end.prec_pi())),
    };
    Ok(SeedPoint { x, residual_depth })
}

// ----- the inductive stage -----

/// The state the parameter-extension step carries between stages.
#[derive(Clone)]
pub struct StageState {
    pub inst: FamilyInstance,
    pub x: Elem,
    /// Checkpoint n: Q^n(x) = 1 (to the recorded depth for the seed, to
    /// working precision after any stage).
    pub checkpoint: u64,
    /// Committed, forward-verified itinerary prefix.
    pub committed: Vec<u8>,
    /// Isometry disc radius exponent in pi-units.
    pub isometry_radius_pi: i64,
}

#[derive(Clone, Debug)]
pub struct StageRecord {
    pub index: u64,
    pub lambda: Elem,
    /// v(lambda_j - lambda_{j-1}) in p-adic units, exact.
    pub dist_exponent: Valuation,
    pub prefix_len: u64,
    /// Residual of the intermediate orbit zero at w0.
    pub zero_residual: Valuation,
    /// Residual of the sphere landing on 1 at the new parameter.
    pub one_residual: Valuation,
}

/// One application of the inductive step: extend the realized itinerary by
/// 1^M 0^m (with the tail back on the fixed point), moving the parameter
/// by exactly p^{-M}.
pub fn extend_parameter(
    state: &StageState,
    big_m: u64,
    m: u64,
    stage_index: u64,
) -> Result<(StageState, StageRecord)> {
    let ctx = state.inst.context().clone();
    let e = ctx.e() as i64;
    let c = state.inst.constants().clone();
    // exact precondition gates
    if (big_m as i64) * e < state.isometry_radius_pi {
        return Err(Error::ConditionViolated(format!(
            "p^-M = p^-{big_m} exceeds the isometry radius pi^{}",
            state.isometry_radius_pi
        )));
    }
    let strict = c.rho_product_val(m) - Rat::from(BigInt::from(big_m));
    if strict <= Rat::zero() {
        return Err(Error::ConditionViolated(format!(
            "p^M rho_{}...rho_1 >= 1 (margin {strict})",
            m - 1
        )));
    }
    let n = state.checkpoint;
    let lambda = state.inst.lambda().clone();
    let goal_pi = ctx.precision() - 4 * e;

    // phi(w) = Q_w^{n+M}(x): scaled isometry with factor p^M; solve
    // phi(w0) = 0
    let x = state.x.clone();
    let base = state.inst.clone();
    let mut eval_phi = |w: &Elem| -> Result<Elem> {
        let inst = base.with_lambda(w.clone())?;
        Ok(inst.orbit(&x, n + big_m)?.pop().unwrap())
    };
    let w0 = isometric_solve(
        &mut eval_phi,
        &lambda,
        &Elem::zero(&ctx),
        -(big_m as i64) * e,
        (big_m as i64) * e,
        goal_pi,
    )?;
    let zero_residual = residual_val(&ctx, &eval_phi(&w0)?)?;

    // psi(w) = Q_w^{n+M+m}(x) on the sphere |w - w0| = rho_m p^{-M}:
    // fix the leading digit, then descend the forced deeper digits
    let sphere_pi = (big_m as i64) * e + ctx.val_to_pi(&c.rho_n_val(m))?;
    let mut eval_psi = |w: &Elem| -> Result<Elem> {
        let inst = base.with_lambda(w.clone())?;
        Ok(inst.orbit(&x, n + big_m + m)?.pop().unwrap())
    };
    let one = Elem::one(&ctx);
    let mut found: Option<Elem> = None;
    for d in ctx.fq().clone().elements().skip(1) {
        let start = w0.add(&Elem::digit_monomial(&ctx, sphere_pi, &d));
        match isometric_solve(&mut eval_psi, &start, &one, 0, sphere_pi + 1, goal_pi) {
            Ok(l) => {
                found = Some(l);
                break;
            }
            Err(Error::ConditionViolated(_)) | Err(Error::PrecisionLoss(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let lambda_new = found.ok_or_else(|| Error::NoRootAtRadius(ctx.pi_to_val(sphere_pi)))?;
    let one_residual = residual_val(&ctx, &eval_psi(&lambda_new)?.sub(&one))?;

    // itinerary prefixes are verified, never assumed
    let inst_new = base.with_lambda(lambda_new.clone())?;
    let mut expected = state.committed.clone();
    expected.extend(std::iter::repeat_n(1u8, big_m as usize));
    expected.extend(std::iter::repeat_n(0u8, m as usize));
    let n_new = n + big_m + m;
    let rec = itinerary(&inst_new, &x, n_new);
    if rec.word.len() < expected.len() || rec.word[..expected.len()] != expected[..] {
        return Err(Error::ConditionViolated(format!(
            "stage {stage_index}: itinerary {} does not extend the committed prefix",
            rec.to_compact_string()
        )));
    }
    let dist = lambda_new.sub(&lambda);
    let dist_exponent = dist.valuation()?;
    if let Valuation::Finite(v) = &dist_exponent {
        // the construction lands at exactly p^{-M}
        if v < &Rat::from(BigInt::from(big_m)) {
            return Err(Error::ConditionViolated(format!(
                "stage {stage_index}: parameter moved by v = {v} < M = {big_m}"
            )));
        }
    }
    let record = StageRecord {
        index: stage_index,
        lambda: lambda_new.clone(),
        dist_exponent,
        prefix_len: n_new,
        zero_residual,
        one_residual,
    };
    let state_new = StageState {
        inst: inst_new,
        x: state.x.clone(),
        checkpoint: n_new,
        committed: expected,
        isometry_radius_pi: ctx.val_to_pi(&c.s_val)? + (big_m as i64) * e,
    };
    Ok((state_new, record))
}

fn fmt_val(v: &Valuation) -> String {
    match v {
        Valuation::Infinite => "inf".to_string(),
        Valuation::Finite(r) => fmt_rat(r),
    }
}

fn residual_val(ctx: &Context, r: &Elem) -> Result<Valuation> {
    match r.valuation() {
        Ok(v) => Ok(v),
        Err(_) => Ok(Valuation::Finite(ctx.pi_to_val(r.prec_pi()))),
    }
}

// ----- certificates -----

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageDoc {
    pub i: u64,
    pub lambda: String,
    pub dist_exponent: String,
    pub prefix_len: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    pub witness: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleDoc {
    #[serde(rename = "M")]
    pub big_m: Vec<u64>,
    pub m: Vec<u64>,
}

/// The serialized, independently checkable record of one finite-depth run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WanderCertificate {
    pub version: u32,
    pub p: u64,
    pub f: u64,
    pub e: u64,
    /// Absolute working precision in pi-digits.
    pub precision: i64,
    pub r_hat_val: String,
    #[serde(rename = "Q")]
    pub q: Vec<(u64, i64, i64)>,
    #[serde(rename = "Q_tail", skip_serializing_if = "Option::is_none")]
    pub q_tail: Option<(u64, String)>,
    pub schedule: ScheduleDoc,
    pub seed: String,
    /// Itinerary steps verified by forward iteration.
    pub horizon: u64,
    pub stages: Vec<StageDoc>,
    pub checks: Vec<CheckRecord>,
}

impl WanderCertificate {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serialization")
    }

    pub fn from_json(s: &str) -> Result<WanderCertificate> {
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("certificate: {e}")))
    }
}

#[derive(Clone, Debug)]
pub struct WanderConfig {
    pub p: u64,
    pub f: u64,
    pub e: Option<u64>,
    /// Working precision in p-adic digits (scaled by e internally).
    pub precision_p_digits: Option<i64>,
    pub r_hat_val: Rat,
    pub q_spec: Vec<(u64, i64, i64)>,
    pub q_tail: Option<(u64, Rat)>,
    pub depth: u64,
    pub disc_samples: u64,
    pub sample_seed: u64,
}

impl WanderConfig {
    pub fn basic(p: u64, q_spec: Vec<(u64, i64, i64)>, depth: u64) -> WanderConfig {
        WanderConfig {
            p,
            f: 1,
            e: None,
            precision_p_digits: None,
            r_hat_val: -Rat::one(),
            q_spec,
            q_tail: None,
            depth,
            disc_samples: 20,
            sample_seed: 1,
        }
    }
}

/// Build the context a wander run needs: e = (p-1)^2 p^{m_max} so every
/// sphere radius, S, and every stage distance is on the valuation grid.
pub fn wander_context(cfg: &WanderConfig, schedule: &Schedule) -> Result<(Context, i64)> {
    let m_max = *schedule.m.iter().max().unwrap_or(&1);
    let e = match cfg.e {
        Some(e) => e,
        None => crate::dynamics::FamilyConstants::required_ramification(cfg.p, m_max),
    };
    let n_p = cfg
        .precision_p_digits
        .unwrap_or_else(|| (2 * schedule.prefix_len() as i64 + 24).max(40));
    let prec_pi = n_p
        .checked_mul(e as i64)
        .ok_or_else(|| Error::InvalidContext("precision overflow".into()))?;
    let ctx = Context::new(cfg.p, cfg.f, e, prec_pi)?;
    Ok((ctx, prec_pi))
}

/// The full search: schedule, seed, d-1 inductive stages, and a self-check
/// ledger. Failed checks are recorded in the certificate rather than
/// silently dropped; hard computational errors abort with the failing
/// stage named.
pub fn wander_search(cfg: &WanderConfig) -> Result<WanderCertificate> {
    let schedule = schedule_sequences(cfg.p, cfg.depth.max(1));
    let (ctx, prec_pi) = wander_context(cfg, &schedule)?;
    let e = ctx.e() as i64;
    let q = Series::from_spec(&ctx, &cfg.q_spec, cfg.q_tail.clone(), cfg.r_hat_val.clone())?;
    let mut checks: Vec<CheckRecord> = Vec::new();

    // schedule inequality, exact
    let (sched_ok, wit) = check_wandering_condition(cfg.p, &schedule.m, &schedule.big_m)?;
    checks.push(CheckRecord {
        name: "schedule_inequality".into(),
        pass: sched_ok,
        witness: wit
            .iter()
            .map(|w| format!("i={}: margin {}", w.index, fmt_rat(&w.margin)))
            .collect::<Vec<_>>()
            .join("; "),
    });
    if !sched_ok {
        return Err(Error::ConditionViolated("schedule inequality failed".into()));
    }

    // base parameter: make the last backward hop exact by solving the
    // one-hop landing equation for lambda (an isometry on the parameter
    // disc), starting from lambda = 1
    let c = crate::dynamics::FamilyConstants::new(cfg.p, cfg.r_hat_val.clone())?;
    let y_pre = Elem::uniformizer_pow(&ctx, ctx.val_to_pi(&c.rho_n_val(1))?);
    let base_inst = FamilyInstance::new(&ctx, q.clone(), Elem::one(&ctx), cfg.r_hat_val.clone())?;
    let mut eval_hop = |w: &Elem| -> Result<Elem> {
        let inst = base_inst.with_lambda(w.clone())?;
        inst.eval(&y_pre)
    };
    let goal_pi = prec_pi - 4 * e;
    let lambda0 = isometric_solve(
        &mut eval_hop,
        &Elem::one(&ctx),
        &Elem::one(&ctx),
        0,
        1,
        goal_pi,
    )?;
    let inst0 = base_inst.with_lambda(lambda0.clone())?;

    // seed with measured landing depth
    let m0 = schedule.m[0];
    let seed = seed_point(&inst0, m0)?;
    let g0 = seed.residual_depth.clone();

    // the z-side digit expansion bottoms out at the representability
    // floor; absorb the remaining landing error into the parameter. The
    // full m0-step landing map is an isometry in lambda on the disc of
    // exponent v(S) - r_1 (the contraction chain tolerates differences up
    // to S at the shallowest sphere), so the polish is feasible exactly
    // when g0 reaches that exponent.
    let polish_floor = &c.s_val - c.rho_n_val(1);
    let polish_floor_pi = ctx.val_to_pi(&crate::series::floor_to_grid(&polish_floor, ctx.e()))?;
    let g0_ok = match &g0 {
        Valuation::Infinite => true,
        Valuation::Finite(v) => *v >= polish_floor,
    };
    checks.push(CheckRecord {
        name: "seed_polish_feasible".into(),
        pass: g0_ok,
        witness: format!(
            "pre-polish v(Q^{m0}(x) - 1) = {} (needs >= v(S) - r_1 = {})",
            fmt_val(&g0),
            fmt_rat(&polish_floor)
        ),
    });
    if !g0_ok {
        return Err(Error::ConditionViolated(
            "seed landing too shallow to absorb into the parameter".into(),
        ));
    }
    let x = seed.x.clone();
    let mut eval_landing = |w: &Elem| -> Result<Elem> {
        let inst = base_inst.with_lambda(w.clone())?;
        Ok(inst.orbit(&x, m0)?.pop().unwrap())
    };
    let one = Elem::one(&ctx);
    let lambda0 = match &g0 {
        Valuation::Infinite => lambda0,
        Valuation::Finite(_) => isometric_solve(
            &mut eval_landing,
            &lambda0,
            &one,
            0,
            polish_floor_pi,
            goal_pi,
        )?,
    };
    let inst0 = base_inst.with_lambda(lambda0.clone())?;
    let seed = SeedPoint {
        x,
        residual_depth: residual_val(
            &ctx,
            &inst0.orbit(&seed.x, m0)?.pop().unwrap().sub(&one),
        )?,
    };
    let g = seed.residual_depth.clone();
    let m0_big = schedule.big_m[0];
    let need = Rat::from(BigInt::from(m0_big)) - Rat::one();
    let g_ok = match &g {
        Valuation::Infinite => true,
        Valuation::Finite(v) => v > &need,
    };
    checks.push(CheckRecord {
        name: "seed_residual_depth".into(),
        pass: g_ok,
        witness: format!(
            "v(Q^{m0}(x) - 1) = {} (needs > M_0 - 1 = {})",
            fmt_val(&g),
            fmt_rat(&need)
        ),
    });
    if !g_ok {
        return Err(Error::ConditionViolated(
            "seed landing too shallow for the first ones-block".into(),
        ));
    }
    let seed_radius_ok = match seed.x.valuation()? {
        Valuation::Finite(v) => v == c.rho_n_val(m0),
        Valuation::Infinite => false,
    };
    checks.push(CheckRecord {
        name: "seed_radius".into(),
        pass: seed_radius_ok,
        witness: format!("v(x) = {}", fmt_rat(&ctx.pi_to_val(seed.x.vlow_pi()))),
    });

    // stages
    let mut state = StageState {
        inst: inst0,
        x: seed.x.clone(),
        checkpoint: m0,
        committed: vec![0u8; m0 as usize],
        isometry_radius_pi: ctx.val_to_pi(&c.s_val)?,
    };
    let mut stages = vec![StageDoc {
        i: 0,
        lambda: lambda0.digit_string(),
        dist_exponent: "inf".into(),
        prefix_len: m0,
    }];
    for j in 1..cfg.depth.max(1) {
        let (next, rec) = extend_parameter(&state, schedule.big_m[j as usize - 1],
            schedule.m[j as usize], j)?;
        checks.push(CheckRecord {
            name: format!("stage_{j}_distance"),
            pass: true,
            witness: format!(
                "v(lambda_{j} - lambda_{}) = {} (>= M_{} = {})",
                j - 1,
                fmt_val(&rec.dist_exponent),
                j - 1,
                schedule.big_m[j as usize - 1]
            ),
        });
        stages.push(StageDoc {
            i: j,
            lambda: rec.lambda.digit_string(),
            dist_exponent: fmt_val(&rec.dist_exponent),
            prefix_len: rec.prefix_len,
        });
        state = next;
    }

    // final itinerary prefix, forward-verified at the last parameter
    let horizon = schedule.prefix_len();
    let expected = expected_prefix(&schedule, &g);
    let rec = itinerary(&state.inst, &seed.x, horizon);
    let word_ok =
        rec.word.len() as u64 >= horizon && rec.word[..horizon as usize] == expected[..];
    checks.push(CheckRecord {
        name: "itinerary_prefix".into(),
        pass: word_ok,
        witness: rec.to_compact_string(),
    });

    // disc checks around the seed
    run_disc_checks(
        &state.inst,
        &seed.x,
        &schedule,
        cfg.disc_samples,
        cfg.sample_seed,
        &mut checks,
    );

    Ok(WanderCertificate {
        version: 1,
        p: cfg.p,
        f: cfg.f,
        e: ctx.e(),
        precision: prec_pi,
        r_hat_val: fmt_rat(&cfg.r_hat_val),
        q: cfg.q_spec.clone(),
        q_tail: cfg.q_tail.as_ref().map(|(i, s)| (*i, fmt_rat(s))),
        schedule: ScheduleDoc {
            big_m: schedule.big_m.clone(),
            m: schedule.m.clone(),
        },
        seed: seed.x.digit_string(),
        horizon,
        stages,
        checks,
    })
}

/// The word the final parameter realizes over the verified horizon.
fn expected_prefix(schedule: &Schedule, _seed_depth: &Valuation) -> Vec<u8> {
    schedule.word()
}

/// Disc itinerary constancy, the image-diameter ledger, and pairwise
/// disjointness of the orbit balls of D = {|z - x| <= S}.
fn run_disc_checks(
    inst: &FamilyInstance,
    x: &Elem,
    schedule: &Schedule,
    samples: u64,
    sample_seed: u64,
    checks: &mut Vec<CheckRecord>,
) {
    use rand::SeedableRng;
    let ctx = inst.context().clone();
    let c = inst.constants().clone();
    let horizon = schedule.prefix_len();
    let s_pi = ctx.val_to_pi(&c.s_val).expect("S on grid");

    // (c) every sampled point of D shares the seed's itinerary prefix
    let reference = itinerary(inst, x, horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let mut const_ok = true;
    let mut const_witness = String::new();
    for k in 0..samples {
        let extra = rng.gen_range(0..3) * ctx.e() as i64;
        let y = x.add(&crate::dynamics::random_with_val(
            &ctx,
            &mut rng,
            s_pi + extra,
            30 * ctx.e(),
        ));
        let rec = itinerary(inst, &y, horizon);
        if rec.word != reference.word {
            const_ok = false;
            const_witness = format!(
                "sample {k}: {} != {}",
                rec.to_compact_string(),
                reference.to_compact_string()
            );
            break;
        }
    }
    checks.push(CheckRecord {
        name: "disc_itinerary_constancy".into(),
        pass: const_ok,
        witness: if const_ok {
            format!("{samples} samples share the prefix")
        } else {
            const_witness
        },
    });

    // (d) image-diameter ledger and disjointness via exact image balls
    let series = inst.conjugated_series().clone();
    let mut balls = vec![UltraBall::closed(x.clone(), c.s_val.clone())];
    let mut ledger_ok = true;
    let mut ledger_witness = Vec::new();
    for _ in 0..horizon {
        match series.image_ball(balls.last().unwrap()) {
            Ok(b) => balls.push(b),
            Err(e) => {
                ledger_ok = false;
                ledger_witness.push(format!("image ball failed: {e}"));
                break;
            }
        }
    }
    if ledger_ok {
        let checkpoints = schedule.checkpoints();
        for (i, (&mi, &bmi)) in schedule.m.iter().zip(schedule.big_m.iter()).enumerate() {
            let step = checkpoints[i] + mi;
            if step as usize >= balls.len() {
                break;
            }
            let need = &c.s_val + Rat::from(BigInt::from(bmi));
            let got = balls[step as usize].radius_val.clone();
            let pass = match &got {
                Valuation::Infinite => true,
                Valuation::Finite(v) => v >= &need,
            };
            if !pass {
                ledger_ok = false;
            }
            ledger_witness.push(format!(
                "diam(Q^{step}(D)) = p^-{} (needs >= {})",
                match &got {
                    Valuation::Infinite => "inf".to_string(),
                    Valuation::Finite(v) => fmt_rat(v),
                },
                fmt_rat(&need)
            ));
        }
    }
    checks.push(CheckRecord {
        name: "diameter_ledger".into(),
        pass: ledger_ok,
        witness: ledger_witness.join("; "),
    });

    let mut disjoint_ok = true;
    let mut disjoint_witness = format!("{} orbit balls pairwise disjoint", balls.len());
    'outer: for a in 0..balls.len() {
        for b in a + 1..balls.len() {
            match balls[a].intersects(&balls[b]) {
                Ok(false) => {}
                Ok(true) => {
                    disjoint_ok = false;
                    disjoint_witness = format!("balls {a} and {b} intersect");
                    break 'outer;
                }
                Err(e) => {
                    disjoint_ok = false;
                    disjoint_witness = format!("balls {a}/{b}: {e}");
                    break 'outer;
                }
            }
        }
    }
    checks.push(CheckRecord {
        name: "disjoint_images".into(),
        pass: disjoint_ok,
        witness: disjoint_witness,
    });
}

// ----- independent verification -----

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub valid: bool,
    pub precision: i64,
    pub checks: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

/// Re-run the certificate's claims in a fresh context whose precision is
/// scaled by `precision_factor` >= 1: the schedule inequality, the
/// itinerary prefix of the seed under the final parameter, disc itinerary
/// constancy, and the diameter/disjointness ledger.
pub fn verify_certificate(
    cert: &WanderCertificate,
    precision_factor: &Rat,
) -> Result<VerificationReport> {
    if precision_factor < &Rat::one() {
        return Err(Error::Parse("precision factor must be >= 1".into()));
    }
    let prec = Rat::from(BigInt::from(cert.precision)) * precision_factor;
    let prec_pi = prec.floor().to_integer();
    let prec_pi = i64::try_from(&prec_pi)
        .map_err(|_| Error::InvalidContext("verification precision overflow".into()))?;
    let ctx = Context::new(cert.p, cert.f, cert.e, prec_pi)?;
    let r_hat = parse_rat(&cert.r_hat_val)
        .ok_or_else(|| Error::Parse("bad r_hat_val".into()))?;
    let q_tail = match &cert.q_tail {
        None => None,
        Some((i, s)) => Some((
            *i,
            parse_rat(s).ok_or_else(|| Error::Parse("bad tail slope".into()))?,
        )),
    };
    let q = Series::from_spec(&ctx, &cert.q, q_tail, r_hat.clone())?;
    let mut checks = Vec::new();

    // (b) schedule inequality, exact
    let (sched_ok, wit) =
        check_wandering_condition(cert.p, &cert.schedule.m, &cert.schedule.big_m)?;
    checks.push(CheckRecord {
        name: "schedule_inequality".into(),
        pass: sched_ok,
        witness: wit
            .iter()
            .map(|w| format!("i={}: margin {}", w.index, fmt_rat(&w.margin)))
            .collect::<Vec<_>>()
            .join("; "),
    });

    let schedule = Schedule {
        p: cert.p,
        m: cert.schedule.m.clone(),
        big_m: cert.schedule.big_m.clone(),
    };
    let lambda_final = Elem::parse_digit_string(
        &ctx,
        &cert
            .stages
            .last()
            .ok_or_else(|| Error::Parse("certificate has no stages".into()))?
            .lambda,
    )?;
    let x = Elem::parse_digit_string(&ctx, &cert.seed)?;
    let inst = FamilyInstance::new(&ctx, q, lambda_final, r_hat)?;

    // (a) itinerary prefix match
    let expected = schedule.word();
    let horizon = cert.horizon.min(expected.len() as u64);
    let rec = itinerary(&inst, &x, horizon);
    let word_ok = rec.word.len() as u64 >= horizon
        && rec.word[..horizon as usize] == expected[..horizon as usize];
    checks.push(CheckRecord {
        name: "itinerary_prefix".into(),
        pass: word_ok,
        witness: rec.to_compact_string(),
    });

    // Cauchy ledger: each recorded stage distance is >= M_{i-1}
    let mut cauchy_ok = true;
    let mut cauchy_witness = Vec::new();
    for (j, st) in cert.stages.iter().enumerate().skip(1) {
        let need = Rat::from(BigInt::from(cert.schedule.big_m[j - 1]));
        let pass = match parse_rat(&st.dist_exponent) {
            Some(v) => v >= need,
            None => st.dist_exponent == "inf",
        };
        if !pass {
            cauchy_ok = false;
        }
        cauchy_witness.push(format!(
            "stage {j}: v = {} (needs >= {})",
            st.dist_exponent,
            fmt_rat(&need)
        ));
    }
    checks.push(CheckRecord {
        name: "cauchy_distances".into(),
        pass: cauchy_ok,
        witness: cauchy_witness.join("; "),
    });

    // (c) + (d): disc constancy, diameter ledger, disjointness
    run_disc_checks(&inst, &x, &schedule, 20, 0xC0FFEE, &mut checks);

    let valid = checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        valid,
        precision: prec_pi,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::rat;

    #[test]
    fn schedule_examples() {
        // p=2, depth 3
        let s = schedule_sequences(2, 3);
        assert_eq!(s.big_m, vec![2, 4, 6]);
        assert_eq!(s.m, vec![4, 6, 8]);
        assert_eq!(s.checkpoints(), vec![0, 6, 16, 30]);
        assert_eq!(s.prefix_len(), 30);
        // p=3, depth 1
        let s = schedule_sequences(3, 1);
        assert_eq!(s.big_m, vec![1]);
        assert_eq!(s.m, vec![4]);
        // the defining constraints hold by construction
        for p in [2u64, 3, 5] {
            let c = crate::dynamics::FamilyConstants::new(p, -Rat::one()).unwrap();
            let s = schedule_sequences(p, 2);
            assert!(Rat::from(BigInt::from(s.big_m[0])) >= c.s_val);
            assert!(
                Rat::from(BigInt::from(s.big_m[1] - s.big_m[0])) >= c.s_val,
                "increment too small for p = {p}"
            );
        }
    }

    #[test]
    fn wandering_condition_witnesses() {
        // p=2, m=4, M=2: margin 1/8
        let (ok, wit) = check_wandering_condition(2, &[4], &[2]).unwrap();
        assert!(ok);
        assert_eq!(wit[0].margin, rat(1, 8));
        // p=2, m=3, M=2: fails (5/4 < 2)
        let (ok, wit) = check_wandering_condition(2, &[3], &[2]).unwrap();
        assert!(!ok);
        assert_eq!(wit[0].margin, rat(5, 4) - rat(2, 1));
        // m=1, M=0: empty product
        let (ok, wit) = check_wandering_condition(2, &[1], &[0]).unwrap();
        assert!(ok);
        assert_eq!(wit[0].margin, rat(0, 1));
    }

    #[test]
    fn schedule_minimality_flips() {
        for p in [2u64, 3] {
            let s = schedule_sequences(p, 3);
            for i in 0..s.m.len() {
                let mut m = s.m.clone();
                m[i] -= 1;
                let (ok, _) = check_wandering_condition(p, &m, &s.big_m).unwrap();
                assert!(!ok, "p={p}: decreasing m_{i} must violate the condition");
                let mut bm = s.big_m.clone();
                bm[i] += 1;
                let (ok, _) = check_wandering_condition(p, &s.m, &bm).unwrap();
                assert!(!ok, "p={p}: increasing M_{i} must violate the condition");
            }
        }
    }

    #[test]
    fn seed_point_trivial_and_single_hop() {
        use crate::padic::rat_int;
        // m0 = 0 is the fixed point itself
        let ctx = Context::new(2, 1, 4, 160).unwrap();
        let inst = FamilyInstance::new(
            &ctx,
            Series::zero(&ctx, rat_int(-1)),
            Elem::one(&ctx),
            rat_int(-1),
        )
        .unwrap();
        let s = seed_point(&inst, 0).unwrap();
        assert!(s.x.sub(&Elem::one(&ctx)).is_exact_zero());
        assert_eq!(s.residual_depth, Valuation::Infinite);
        // p=3, m0 = 1: one of the polygon's roots at |x| = 3^{-1/3};
        // landing depth limited by the representability floor but > 0,
        // giving forward itinerary 0,1,...
        let ctx = Context::new(3, 1, 12, 480).unwrap();
        let inst = FamilyInstance::new(
            &ctx,
            Series::zero(&ctx, rat_int(-1)),
            Elem::one(&ctx),
            rat_int(-1),
        )
        .unwrap();
        let s = seed_point(&inst, 1).unwrap();
        assert_eq!(
            s.x.valuation().unwrap(),
            Valuation::Finite(rat(1, 3)),
        );
        match &s.residual_depth {
            Valuation::Finite(g) => assert!(g > &Rat::zero()),
            Valuation::Infinite => {}
        }
        let rec = itinerary(&inst, &s.x, 2);
        assert_eq!(rec.word[0], 0);
        assert_eq!(rec.word[1], 1);
    }
}
