//! A benchmarking harness for eliciting and analyzing agent behavior in six
//! classic behavioral economics games.
//!
//! The library covers the full pipeline:
//!
//! - [`games`] — the eight player roles, their action spaces and payoffs;
//! - [`agents`] — scripted reference agents with known preferences, plus the
//!   reply parser;
//! - [`connector`] — collection of behavior samples from chat-completion
//!   endpoints, with raw transcript persistence;
//! - [`store`] — behavior histograms, human baseline files, and session
//!   layout;
//! - [`analysis`] — the behavioral Turing test, Wasserstein dissimilarity,
//!   CES utility machinery, preference curves, multinomial-logit estimation
//!   of the preference weight, and cross-game inconsistency;
//! - [`config`], [`pipeline`], [`report`] — the orchestration behind the
//!   `econobench` command-line tool.
//!
//! The narrative guide lives in `book/`; its code snippets compile and run
//! as doc-tests of this crate.

pub mod agents;
pub mod analysis;
mod chart;
pub mod config;
pub mod connector;
pub mod games;
pub mod pipeline;
pub mod report;
pub mod store;

pub use agents::{parse_action, AgentKind, AgentProfile, ScriptedAgent};
pub use analysis::{
    ces_utility, expected_utility, fit_logit_b, inconsistency_score, preference_curve,
    turing_test, wasserstein_1d, PartnerModel, TuringMethod, UtilityParams,
};
pub use config::RunConfig;
pub use connector::{CollectionRecord, EndpointConfig};
pub use games::{Action, ActionSpace, GameId, GameParams, GameSpec, Move, PayoffPair};
pub use store::{ActionDistribution, HumanBaseline, SessionStore};

// The book's code snippets double as doc-tests so the guide cannot drift
// from the API. `cargo test --doc` runs them.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub struct $name;
        };
    }

    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(Games, "../../../book/src/games.md");
    chapter!(Agents, "../../../book/src/agents.md");
    chapter!(Distributions, "../../../book/src/distributions.md");
    chapter!(TuringTest, "../../../book/src/turing-test.md");
    chapter!(Wasserstein, "../../../book/src/wasserstein.md");
    chapter!(Preferences, "../../../book/src/preferences.md");
    chapter!(Collection, "../../../book/src/collection.md");
    chapter!(Cli, "../../../book/src/cli.md");
}
