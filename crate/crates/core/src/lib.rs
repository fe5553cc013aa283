//! Core library for the H-LPS hybrid location-privacy scheme simulator.
//!
//! H-LPS lets a group of nearby users obtain location-based services without
//! any of them disclosing a precise position. Each peer broadcasts a slightly
//! obfuscated location together with a privacy requirement, the group elects
//! the member with the lowest requirement as query user (QU), and the QU
//! queries the service provider with the centroid of all broadcast positions.
//! The provider's answer is forwarded back to every peer, so the provider
//! only ever sees one blurred point standing in for the whole group.
//!
//! The crate is split along the moving parts of that scheme:
//!
//! - [`geometry`]: planar primitives — distances, centroids, least-squares
//!   line fits, and circle overlap areas used for service accuracy.
//! - [`protocol`]: the round state machine — obfuscation, broadcast, QU
//!   election, query construction, and response forwarding, with a full
//!   message trace.
//! - [`metrics`]: entropy-based privacy levels, overlap-based service
//!   accuracy, message/byte overhead, and a per-message energy model.
//! - [`sim`]: scenario generation, a POI-database provider model,
//!   multi-round simulation, parameter sweeps, and timing probes.
//!
//! Everything is deterministic given a seed: identical scenarios produce
//! bit-identical round traces and metric reports.
//!
//! The crate is `no_std`-compatible (with `alloc`) when built without the
//! default `std` feature; only [`sim::timing_probe`] requires `std`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod math;

pub mod geometry;
pub mod metrics;
pub mod protocol;
pub mod sim;
