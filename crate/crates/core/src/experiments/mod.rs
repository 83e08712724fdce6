//! Scenario runner: flat key-value configuration, the eight fixed
//! scenarios, and report emission (CSV samples, JSON summary, plot data).

mod config;
mod report;
mod scenarios;

pub(crate) use config::parse_number;
pub use config::{ScenarioConfig, KNOWN_KEYS};
pub use report::{emit, Check, Format, Report, SampleRow, Series};

use std::fmt;

use crate::error::{Error, Result};

/// The fixed scenario list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Theorem1,
    Theorem2Tau,
    Decay,
    GammaVsAlpha,
    Counterexample,
    Corollary2,
    Convergence,
    Comparison,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::Theorem1,
        Scenario::Theorem2Tau,
        Scenario::Decay,
        Scenario::GammaVsAlpha,
        Scenario::Counterexample,
        Scenario::Corollary2,
        Scenario::Convergence,
        Scenario::Comparison,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Theorem1 => "theorem1",
            Scenario::Theorem2Tau => "theorem2-tau",
            Scenario::Decay => "decay",
            Scenario::GammaVsAlpha => "gamma-vs-alpha",
            Scenario::Counterexample => "counterexample",
            Scenario::Corollary2 => "corollary2",
            Scenario::Convergence => "convergence",
            Scenario::Comparison => "comparison",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }

    /// The statement each scenario checks.
    pub fn anchor(self) -> &'static str {
        match self {
            Scenario::Theorem1 => "β dx dr/r is a Carleson measure when α₂² dx dr/r is (weak DKP)",
            Scenario::Theorem2Tau => "‖β‖_C(Δ(x, τR)) decays like a power of τ for constant coefficients",
            Scenario::Decay => "β(x, τr) <= β(x, r)/2 + C γ(x, r)² for small τ",
            Scenario::GammaVsAlpha => "γ² dx dr/r is Carleson on Δ0 with norm bounded by that of α₂² on 3Δ0",
            Scenario::Counterexample => "for A = a_n(t) I the β Carleson norm grows like (2n - 2) ln 2",
            Scenario::Corollary2 => "|∇²u|² t³ / u² dx dt is a Carleson measure under the DKP condition",
            Scenario::Convergence => "discrete solutions converge to the Green function with pole at infinity",
            Scenario::Comparison => "∫|∇u - ∇u⁰|² <= μ0² min(∫|A - A0|²|∇u|², ∫|A - A0|²|∇u⁰|²)",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Runs a scenario. Failed checks are recorded in the report, not raised.
pub fn run(config: &ScenarioConfig) -> Result<Report> {
    let mut report = match config.scenario() {
        Scenario::Theorem1 => scenarios::theorem1(config)?,
        Scenario::Theorem2Tau => scenarios::theorem2_tau(config)?,
        Scenario::Decay => scenarios::decay(config)?,
        Scenario::GammaVsAlpha => scenarios::gamma_vs_alpha(config)?,
        Scenario::Counterexample => scenarios::counterexample(config)?,
        Scenario::Corollary2 => scenarios::corollary2(config)?,
        Scenario::Convergence => scenarios::convergence(config)?,
        Scenario::Comparison => scenarios::comparison(config)?,
    };
    report.params = config.resolved();
    Ok(report)
}
