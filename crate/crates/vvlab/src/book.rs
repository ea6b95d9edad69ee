//! Compiles the guide's code snippets as doc-tests so the book and the
//! library cannot drift apart. Build the rendered book with `mdbook build
//! book/`; run the snippets with `cargo test --doc`.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/network-model.md")]
mod network_model {}
#[doc = include_str!("../../../book/src/power-flow.md")]
mod power_flow {}
#[doc = include_str!("../../../book/src/scenarios.md")]
mod scenarios {}
#[doc = include_str!("../../../book/src/conformal.md")]
mod conformal {}
#[doc = include_str!("../../../book/src/environment.md")]
mod environment {}
#[doc = include_str!("../../../book/src/neural.md")]
mod neural {}
#[doc = include_str!("../../../book/src/agent.md")]
mod agent {}
#[doc = include_str!("../../../book/src/oracles.md")]
mod oracles {}
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
#[doc = include_str!("../../../book/src/formats.md")]
mod formats {}
