//! Unit conversions between scenario-file units and canonical internal units.
//!
//! Canonical units everywhere inside the library: work in MI, speed in MI/s,
//! data in bits, bandwidth in bits/s, time in seconds, rates in 1/s, memory
//! and storage in bytes. Scenario files use MB, Mbit/s, ms and GB; converting
//! once at the boundary keeps the 8x bit/byte factor out of the cost model.
//! All conversions are decimal (1 MB = 10^6 bytes).

pub const BITS_PER_MEGABYTE: f64 = 8.0e6;
pub const BYTES_PER_MEGABYTE: f64 = 1.0e6;
pub const BYTES_PER_GIGABYTE: f64 = 1.0e9;
pub const BITS_PER_SECOND_PER_MBPS: f64 = 1.0e6;
pub const SECONDS_PER_MILLISECOND: f64 = 1.0e-3;

pub fn megabytes_to_bits(mb: f64) -> f64 {
    mb * BITS_PER_MEGABYTE
}

pub fn megabytes_to_bytes(mb: f64) -> f64 {
    mb * BYTES_PER_MEGABYTE
}

pub fn gigabytes_to_bytes(gb: f64) -> f64 {
    gb * BYTES_PER_GIGABYTE
}

pub fn mbps_to_bits_per_second(mbps: f64) -> f64 {
    mbps * BITS_PER_SECOND_PER_MBPS
}

pub fn milliseconds_to_seconds(ms: f64) -> f64 {
    ms * SECONDS_PER_MILLISECOND
}
