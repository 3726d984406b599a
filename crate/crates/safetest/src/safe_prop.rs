//! Safe proportion tests on Bernoulli streams.
//!
//! Two constructions share this module:
//!
//! * the two-sample 2x2 e-variable for H0 "same success probability in both
//!   groups", with plug-in (theta_a, theta_b) taken from Beta posteriors
//!   over strictly past batches, and
//! * the one-sample sample-ratio-mismatch (SRM) monitor for H0 "assignment
//!   probability equals theta0", which integrates the alternative over a
//!   Beta mixing distribution in closed form (beta-binomial marginal).
//!
//! Both are e-processes: under H0 the running product has expectation at
//! most 1 at any stopping time, so crossing 1/alpha is a valid rejection at
//! any data-dependent moment. Predictability is what keeps the plug-in
//! version honest: the estimates fed into batch j must not depend on batch
//! j itself.

use serde::{Deserialize, Serialize};

use crate::eprocess::{EProcess, EValue, TestState};
use crate::error::{Error, Result};

/// Beta(alpha1, beta1) prior over a success probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub alpha1: f64,
    pub beta1: f64,
}

impl BetaPrior {
    pub fn new(alpha1: f64, beta1: f64) -> Result<Self> {
        if !(alpha1.is_finite() && alpha1 > 0.0 && beta1.is_finite() && beta1 > 0.0) {
            return Err(Error::domain(format!(
                "Beta prior parameters must be > 0, got ({alpha1}, {beta1})"
            )));
        }
        Ok(BetaPrior { alpha1, beta1 })
    }

    pub fn symmetric(c: f64) -> Result<Self> {
        BetaPrior::new(c, c)
    }

    /// The `(10 epsilon^2)^-1` rule: a symmetric prior whose concentration
    /// matches the smallest mismatch worth detecting. epsilon = 0.01 gives
    /// Beta(1000, 1000).
    pub fn from_epsilon(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= 0.0 || epsilon >= 1.0 {
            return Err(Error::domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        BetaPrior::symmetric(1.0 / (10.0 * epsilon * epsilon))
    }
}

/// Beta posterior; conjugate updates add observed successes and failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPosterior {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaPosterior {
    pub fn from_prior(prior: &BetaPrior) -> Self {
        BetaPosterior { alpha: prior.alpha1, beta: prior.beta1 }
    }

    pub fn observe(&mut self, successes: u64, failures: u64) {
        self.alpha += successes as f64;
        self.beta += failures as f64;
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Log marginal likelihood of a batch under this posterior, with
    /// binomial coefficients dropped:
    /// `ln B(alpha + s, beta + f) - ln B(alpha, beta)`.
    ///
    /// Evaluated as the exact telescoping product
    /// `sum ln(alpha+i) + sum ln(beta+j) - sum ln(alpha+beta+k)` rather
    /// than a difference of two large log-beta values, which would cancel
    /// catastrophically for concentrated posteriors. The terms depend only
    /// on the prior and cumulative counts, never on how the stream was cut
    /// into batches, which is what keeps batch-partition invariance tight.
    /// Cost is O(successes + failures).
    pub fn ln_marginal(&self, successes: u64, failures: u64) -> Result<f64> {
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::domain("posterior parameters must be > 0"));
        }
        let total = successes + failures;
        let mut sum = 0.0;
        let mut comp = 0.0; // Kahan compensation
        let add = |x: f64, sum: &mut f64, comp: &mut f64| {
            let y = x - *comp;
            let t = *sum + y;
            *comp = (t - *sum) - y;
            *sum = t;
        };
        for k in 0..total {
            let num = if k < successes {
                (self.alpha + k as f64).ln()
            } else {
                (self.beta + (k - successes) as f64).ln()
            };
            add(num - (self.alpha + self.beta + k as f64).ln(), &mut sum, &mut comp);
        }
        Ok(sum)
    }
}

/// One time-ordered batch of a two-group Bernoulli experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropBatch {
    /// Group a: total observations and successes.
    pub n_a: u64,
    pub n_a1: u64,
    /// Group b: total observations and successes.
    pub n_b: u64,
    pub n_b1: u64,
}

impl PropBatch {
    /// Empty batches are allowed and contribute a factor of exactly 1.
    pub fn new(n_a: u64, n_a1: u64, n_b: u64, n_b1: u64) -> Result<Self> {
        if n_a1 > n_a || n_b1 > n_b {
            return Err(Error::invalid(format!(
                "successes exceed totals: a {n_a1}/{n_a}, b {n_b1}/{n_b}"
            )));
        }
        Ok(PropBatch { n_a, n_a1, n_b, n_b1 })
    }

    pub fn total(&self) -> u64 {
        self.n_a + self.n_b
    }

    pub fn successes(&self) -> u64 {
        self.n_a1 + self.n_b1
    }
}

fn check_open_unit(name: &str, theta: f64) -> Result<()> {
    if !theta.is_finite() || theta <= 0.0 || theta >= 1.0 {
        return Err(Error::domain(format!("{name} must lie strictly in (0, 1), got {theta}")));
    }
    Ok(())
}

/// Log e-value of one batch under plug-in alternatives (theta_a, theta_b):
///
/// ```text
/// S = theta_a^na1 (1-theta_a)^(na-na1) theta_b^nb1 (1-theta_b)^(nb-nb1)
///     / [ theta0^n1 (1-theta0)^(n-n1) ],   theta0 = (na/n) theta_a + (nb/n) theta_b.
/// ```
///
/// The mixture weights make the denominator the best null fit of the same
/// plug-ins, which is what gives E[S] <= 1 under every null theta.
/// `theta_a == theta_b` returns exactly 0 (S = 1): both hypotheses coincide.
pub fn two_sample_batch_log_evalue(batch: &PropBatch, theta_a: f64, theta_b: f64) -> Result<f64> {
    check_open_unit("theta_a", theta_a)?;
    check_open_unit("theta_b", theta_b)?;
    let n = batch.total();
    if n == 0 || theta_a == theta_b {
        return Ok(0.0);
    }
    let (na, nb) = (batch.n_a as f64, batch.n_b as f64);
    let theta0 = (na / n as f64) * theta_a + (nb / n as f64) * theta_b;
    let n1 = batch.successes();
    // ln(1 - theta) via ln_1p(-theta) for accuracy near theta = 0.
    let log_num = batch.n_a1 as f64 * theta_a.ln()
        + (batch.n_a - batch.n_a1) as f64 * (-theta_a).ln_1p()
        + batch.n_b1 as f64 * theta_b.ln()
        + (batch.n_b - batch.n_b1) as f64 * (-theta_b).ln_1p();
    let log_den = n1 as f64 * theta0.ln() + (n - n1) as f64 * (-theta0).ln_1p();
    Ok(log_num - log_den)
}

/// E-value wrapper over [`two_sample_batch_log_evalue`].
pub fn two_sample_batch_evalue(batch: &PropBatch, theta_a: f64, theta_b: f64) -> Result<EValue> {
    EValue::from_log(two_sample_batch_log_evalue(batch, theta_a, theta_b)?)
}

/// Sequential two-sample proportion test.
///
/// For batch j the plug-ins are the posterior means of per-group Beta
/// posteriors updated on batches 1..j-1 only; batch j is absorbed after its
/// e-value is computed. With a symmetric prior the first batch always
/// contributes exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialTwoSampleProp {
    prior: BetaPrior,
    posterior_a: BetaPosterior,
    posterior_b: BetaPosterior,
    process: EProcess,
}

impl SequentialTwoSampleProp {
    pub fn new(prior: BetaPrior, alpha: f64) -> Result<Self> {
        Ok(SequentialTwoSampleProp {
            prior,
            posterior_a: BetaPosterior::from_prior(&prior),
            posterior_b: BetaPosterior::from_prior(&prior),
            process: EProcess::new(alpha)?,
        })
    }

    /// Computes the batch e-value from past data, folds it into the
    /// process, then absorbs the batch. Returns the batch log e-value.
    pub fn update(&mut self, batch: &PropBatch) -> Result<f64> {
        let log_e =
            two_sample_batch_log_evalue(batch, self.posterior_a.mean(), self.posterior_b.mean())?;
        self.process.update(EValue::from_log(log_e)?, batch.total());
        self.posterior_a.observe(batch.n_a1, batch.n_a - batch.n_a1);
        self.posterior_b.observe(batch.n_b1, batch.n_b - batch.n_b1);
        Ok(log_e)
    }

    pub fn process(&self) -> &EProcess {
        &self.process
    }

    pub fn posterior_a(&self) -> &BetaPosterior {
        &self.posterior_a
    }

    pub fn posterior_b(&self) -> &BetaPosterior {
        &self.posterior_b
    }
}

/// Runs the sequential test over a whole batch sequence.
pub fn sequential_two_sample(
    batches: &[PropBatch],
    prior: &BetaPrior,
    alpha: f64,
) -> Result<EProcess> {
    let mut test = SequentialTwoSampleProp::new(*prior, alpha)?;
    for batch in batches {
        test.update(batch)?;
    }
    Ok(test.process.clone())
}

/// Log e-value of one SRM batch: beta-binomial marginal of the batch under
/// the current posterior over theta1, against the fixed theta0 null.
/// The posterior absorbs the batch before returning.
pub fn srm_batch_log_evalue(
    successes: u64,
    total: u64,
    posterior: &mut BetaPosterior,
    theta0: f64,
) -> Result<f64> {
    check_open_unit("theta0", theta0)?;
    if successes > total {
        return Err(Error::invalid(format!("successes {successes} exceed total {total}")));
    }
    if total == 0 {
        return Ok(0.0);
    }
    let failures = total - successes;
    let log_num = posterior.ln_marginal(successes, failures)?;
    let log_den = successes as f64 * theta0.ln() + failures as f64 * (-theta0).ln_1p();
    posterior.observe(successes, failures);
    Ok(log_num - log_den)
}

/// E-value wrapper over [`srm_batch_log_evalue`].
pub fn srm_batch_evalue(
    successes: u64,
    total: u64,
    posterior: &mut BetaPosterior,
    theta0: f64,
) -> Result<EValue> {
    EValue::from_log(srm_batch_log_evalue(successes, total, posterior, theta0)?)
}

/// Configuration of the sample-ratio-mismatch monitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrmConfig {
    /// Intended probability of assignment to group a.
    pub theta0: f64,
    /// Smallest mismatch worth detecting; sets the prior concentration.
    pub epsilon: f64,
    pub alpha: f64,
}

impl Default for SrmConfig {
    /// theta0 = 0.5, epsilon = 0.01 (prior Beta(1000, 1000)), alpha = 0.01.
    fn default() -> Self {
        SrmConfig { theta0: 0.5, epsilon: 0.01, alpha: 0.01 }
    }
}

impl SrmConfig {
    pub fn new(theta0: f64, epsilon: f64, alpha: f64) -> Result<Self> {
        let config = SrmConfig { theta0, epsilon, alpha };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        crate::eprocess::check_alpha(self.alpha)?;
        check_open_unit("theta0", self.theta0)?;
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::domain(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        // theta0 +- epsilon must stay inside (0,1) for the mismatch to be a
        // valid probability.
        if self.theta0 - self.epsilon <= 0.0 || self.theta0 + self.epsilon >= 1.0 {
            return Err(Error::domain(format!(
                "theta0 +- epsilon must stay within (0, 1); got theta0 = {}, epsilon = {}",
                self.theta0, self.epsilon
            )));
        }
        Ok(())
    }

    pub fn prior(&self) -> Result<BetaPrior> {
        BetaPrior::from_epsilon(self.epsilon)
    }
}

/// Streaming sample-ratio-mismatch monitor over per-batch assignment
/// counts. Rejects H0: theta = theta0 when the e-process crosses 1/alpha.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrmMonitor {
    config: SrmConfig,
    posterior: BetaPosterior,
    process: EProcess,
}

impl SrmMonitor {
    pub fn new(config: SrmConfig) -> Result<Self> {
        config.validate()?;
        let prior = config.prior()?;
        Self::with_prior(config, prior)
    }

    pub fn with_prior(config: SrmConfig, prior: BetaPrior) -> Result<Self> {
        config.validate()?;
        Ok(SrmMonitor {
            config,
            posterior: BetaPosterior::from_prior(&prior),
            process: EProcess::new(config.alpha)?,
        })
    }

    /// Feeds one batch of assignment counts; group a is the one whose
    /// intended share is theta0. Returns the batch log e-value.
    pub fn observe(&mut self, assigned_a: u64, assigned_b: u64) -> Result<f64> {
        let total = assigned_a + assigned_b;
        let log_e =
            srm_batch_log_evalue(assigned_a, total, &mut self.posterior, self.config.theta0)?;
        self.process.update(EValue::from_log(log_e)?, total);
        Ok(log_e)
    }

    pub fn config(&self) -> &SrmConfig {
        &self.config
    }

    pub fn posterior(&self) -> &BetaPosterior {
        &self.posterior
    }

    pub fn process(&self) -> &EProcess {
        &self.process
    }

    pub fn log_e(&self) -> f64 {
        self.process.log_e()
    }

    pub fn n(&self) -> u64 {
        self.process.n()
    }

    pub fn decision(&self) -> TestState {
        self.process.decision()
    }

    pub fn rejected_at(&self) -> Option<u64> {
        self.process.rejected_at()
    }
}
