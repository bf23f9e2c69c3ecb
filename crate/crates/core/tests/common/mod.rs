#![allow(dead_code)]

pub mod gradcheck;
pub mod reference;
pub mod synth;
