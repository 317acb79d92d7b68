//! Gesture triggers with hysteresis.
//!
//! `ThumbButton` watches the thumb tip against the middle finger's PIP
//! knuckle. `GrabSelect` watches the mean distance of the middle, ring and
//! pinky tips to the wrist.

use crate::hand::{HandFrame, Joint, Side};
use crate::Error;

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerConfig {
    pub thumb_press_dist: f64,
    pub thumb_release_dist: f64,
    pub grab_press_dist: f64,
    pub grab_release_dist: f64,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        TriggerConfig {
            thumb_press_dist: 0.015,
            thumb_release_dist: 0.025,
            grab_press_dist: 0.09,
            grab_release_dist: 0.12,
        }
    }
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let ok = self.thumb_press_dist > 0.0
            && self.thumb_release_dist > self.thumb_press_dist
            && self.grab_press_dist > 0.0
            && self.grab_release_dist > self.grab_press_dist;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "trigger release distance must exceed press distance",
            ))
        }
    }
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gesture {
    ThumbButton,
    GrabSelect,
}

impl Gesture {
    pub fn name(self) -> &'static str {
        match self {
            Gesture::ThumbButton => "thumb_button",
            Gesture::GrabSelect => "grab_select",
        }
    }

    pub fn from_name(s: &str) -> Option<Gesture> {
        match s {
            "thumb_button" => Some(Gesture::ThumbButton),
            "grab_select" => Some(Gesture::GrabSelect),
            _ => None,
        }
    }
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TriggerEvent {
    Press,
    Release,
}

impl TriggerEvent {
    pub fn name(self) -> &'static str {
        match self {
            TriggerEvent::Press => "press",
            TriggerEvent::Release => "release",
        }
    }

    pub fn from_name(s: &str) -> Option<TriggerEvent> {
        match s {
            "press" => Some(TriggerEvent::Press),
            "release" => Some(TriggerEvent::Release),
            _ => None,
        }
    }
}

/// Two-threshold latch on a distance signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Hysteresis {
    pub pressed: bool,
}

impl Hysteresis {
    pub fn update(&mut self, distance: f64, press: f64, release: f64) -> Option<TriggerEvent> {
        if !self.pressed && distance < press {
            self.pressed = true;
            Some(TriggerEvent::Press)
        } else if self.pressed && distance > release {
            self.pressed = false;
            Some(TriggerEvent::Release)
        } else {
            None
        }
    }
}

/// Pressed flags per gesture per hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TriggerState {
    thumb: [Hysteresis; 2],
    grab: [Hysteresis; 2],
}

impl TriggerState {
    pub fn is_pressed(&self, gesture: Gesture, side: Side) -> bool {
        match gesture {
            Gesture::ThumbButton => self.thumb[side.index()].pressed,
            Gesture::GrabSelect => self.grab[side.index()].pressed,
        }
    }
}

pub fn thumb_distance(frame: &HandFrame, side: Side) -> Result<f64, Error> {
    let hand = frame.require_hand(side)?;
    let thumb = hand.require(side, Joint::ThumbTip)?;
    let knuckle = hand.require(side, Joint::MiddlePip)?;
    Ok(thumb.distance(knuckle))
}

pub fn grab_distance(frame: &HandFrame, side: Side) -> Result<f64, Error> {
    let hand = frame.require_hand(side)?;
    let wrist = hand.wrist.position;
    let mut sum = 0.0;
    for j in [Joint::MiddleTip, Joint::RingTip, Joint::PinkyTip] {
        sum += hand.require(side, j)?.distance(wrist);
    }
    Ok(sum / 3.0)
}

pub fn thumb_button(
    frame: &HandFrame,
    side: Side,
    cfg: &TriggerConfig,
    state: &mut TriggerState,
) -> Result<Option<TriggerEvent>, Error> {
    let d = thumb_distance(frame, side)?;
    Ok(state.thumb[side.index()].update(d, cfg.thumb_press_dist, cfg.thumb_release_dist))
}

pub fn grab_select(
    frame: &HandFrame,
    side: Side,
    cfg: &TriggerConfig,
    state: &mut TriggerState,
) -> Result<Option<TriggerEvent>, Error> {
    let d = grab_distance(frame, side)?;
    Ok(state.grab[side.index()].update(d, cfg.grab_press_dist, cfg.grab_release_dist))
}
