//! Core analysis library for `wf-sentinel`, a static security scanner for
//! GitHub Actions workflow files.
//!
//! The pipeline: YAML is loaded into a span-preserving tree ([`yaml`]),
//! modeled as a typed workflow document ([`model`]), and examined by ten
//! weakness detectors ([`detect`]) parameterized by a [`profile::Profile`].
//! Findings flow into reports ([`report`]), pin autofixes ([`pin`]), and the
//! corpus harness ([`corpus`]).

pub mod advisory;
pub mod catalog;
pub mod config;
pub mod corpus;
pub mod detect;
pub mod expr;
pub mod finding;
pub mod model;
pub mod pin;
pub mod profile;
pub mod report;
pub mod secrets;
pub mod span;
pub mod yaml;

pub use finding::{Confidence, Finding, Severity, Weakness};
pub use profile::Profile;
pub use span::SourceSpan;
