#![allow(dead_code)]

use std::sync::Arc;

use imdp_core::accountants::{rdp_additive_accumulator, rdp_additive_rule};
use imdp_core::measures::LossValue;
use imdp_core::mechanisms::{rr_for_renyi, MechanismSpec};
use imdp_core::protocol::{Dataset, HaltReason, Message};

pub fn ln3() -> f64 {
    3f64.ln()
}

pub fn renyi2(eps: f64) -> LossValue {
    LossValue::renyi(2.0, eps).unwrap()
}

/// Spawn of an RR leaf calibrated to `D_2 <= loss`, claiming `loss`.
pub fn rr_spawn(loss: f64) -> Message {
    let eps = rr_for_renyi(2.0, loss).unwrap();
    Message::spawn(MechanismSpec::Rr { eps }, renyi2(loss))
}

pub fn q() -> Message {
    Message::query("q")
}

pub fn sub(j: u32) -> Message {
    Message::sub(j, q())
}

pub fn halt() -> Message {
    Message::Halt(HaltReason::AdversaryHalt)
}

pub fn x0() -> Dataset {
    Dataset::bit(false)
}

pub fn x1() -> Dataset {
    Dataset::bit(true)
}

pub fn rdp_filter(budget: f64) -> imdp_core::composition::Composer {
    imdp_core::composition::filt_con_im(Arc::new(rdp_additive_rule(2.0)), renyi2(budget))
}

pub fn rdp_odometer() -> imdp_core::composition::Composer {
    imdp_core::composition::odom_con_im(Arc::new(rdp_additive_accumulator(2.0)))
}
