//! Uniform driver for reactive and learned controllers.

use crate::agents::Agent;
use crate::env::{ControlView, FarmEnv};
use crate::error::Result;
use crate::reactive::{reactive_action, ReactiveKind};
use crate::rng::SimRng;
use crate::types::ScalingAction;

pub trait Controller {
    fn decide(&mut self, view: &ControlView, rng: &mut SimRng) -> ScalingAction;
}

impl Controller for ReactiveKind {
    fn decide(&mut self, view: &ControlView, _rng: &mut SimRng) -> ScalingAction {
        reactive_action(*self, view)
    }
}

/// Always issues the same action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Constant(pub ScalingAction);

impl Controller for Constant {
    fn decide(&mut self, _view: &ControlView, _rng: &mut SimRng) -> ScalingAction {
        self.0
    }
}

/// A learned agent acting without exploration.
#[derive(Debug)]
pub struct Greedy<'a, A: Agent>(pub &'a mut A);

impl<A: Agent> Controller for Greedy<'_, A> {
    fn decide(&mut self, view: &ControlView, rng: &mut SimRng) -> ScalingAction {
        self.0.act(&view.observation, false, rng)
    }
}

/// Steps `env` until it terminates. Returns the number of steps taken.
pub fn run_episode<C: Controller + ?Sized>(env: &mut FarmEnv, ctrl: &mut C, rng: &mut SimRng) -> Result<usize> {
    let mut steps = 0;
    while !env.is_terminated() {
        let action = ctrl.decide(&env.view(), rng);
        env.step(action)?;
        steps += 1;
    }
    Ok(steps)
}
