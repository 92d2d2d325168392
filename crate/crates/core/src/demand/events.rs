//! Template-based event narratives. Each (archetype, level) pair has its
//! own bank of templates; a template is picked deterministically from the
//! seed and the event coordinates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::generator::Archetype;
use super::levels::RegionLevels;
use super::{DemandError, HOURS_PER_DAY};
use crate::rng::stream_seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub region: u32,
    pub building_type: Archetype,
    pub day: usize,
    pub hour: usize,
    pub text: String,
    pub level: u8,
}

impl EventRecord {
    pub fn global_hour(&self) -> usize {
        self.day * HOURS_PER_DAY + self.hour
    }
}

const WEEKDAYS: [&str; 7] =
    ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"];

/// Day 0 is a Monday.
pub fn weekday_name(day: usize) -> &'static str {
    WEEKDAYS[day % 7]
}

pub fn time_of_day_phrase(hour: usize) -> &'static str {
    match hour % 24 {
        0..=4 => "overnight",
        5..=7 => "in the early morning",
        8..=10 => "in the morning",
        11..=13 => "around midday",
        14..=16 => "in the afternoon",
        17..=19 => "in the evening",
        _ => "late in the evening",
    }
}

fn templates(archetype: Archetype, level: u8) -> &'static [&'static str] {
    use Archetype::*;
    match (archetype, level) {
        (Residential, 0) => &[
            "{When} on {weekday}, the {building} is asleep and almost no taps are running.",
            "Households in the {building} are quiet {when} on {weekday}; only the odd appliance cycles.",
            "{When} on {weekday}, streets in the {building} are dark and homes are idle.",
        ],
        (Residential, 1) => &[
            "{When} on {weekday}, a few early risers in the {building} start the kettle.",
            "Light activity in the {building} {when} on {weekday}, with most residents away or resting.",
            "{When} on {weekday}, the {building} sees scattered dishwashing and a handful of showers.",
        ],
        (Residential, 2) => &[
            "{When} on {weekday}, residents of the {building} go about ordinary chores and cooking.",
            "A steady, unremarkable stretch in the {building} {when} on {weekday}: laundry and lunch prep.",
            "{When} on {weekday}, families in the {building} are home running routine errands.",
        ],
        (Residential, 3) => &[
            "{When} on {weekday}, the {building} is busy with showers, cooking and garden watering.",
            "Most households in the {building} are active {when} on {weekday}, getting ready for the day.",
            "{When} on {weekday}, a neighborhood cleanup day keeps the {building} busy with hoses and washing.",
        ],
        (Residential, 4) => &[
            "{When} on {weekday}, everyone in the {building} is showering and cooking at once before a holiday gathering.",
            "A heat wave {when} on {weekday} has the whole {building} filling pools and running sprinklers.",
            "{When} on {weekday}, a block party in the {building} brings crowded kitchens and constant washing.",
        ],
        (AcademicA, 0) => &[
            "{When} on {weekday}, the {building} is locked and dark with no classes scheduled.",
            "The {building} is closed {when} on {weekday}; only security makes rounds.",
            "{When} on {weekday}, lecture halls in the {building} stand empty.",
        ],
        (AcademicA, 1) => &[
            "{When} on {weekday}, a handful of staff unlock offices in the {building}.",
            "Cleaning crews work through the {building} {when} on {weekday} before anyone arrives.",
            "{When} on {weekday}, the {building} hosts a small study group and little else.",
        ],
        (AcademicA, 2) => &[
            "{When} on {weekday}, a partial class schedule runs in the {building}.",
            "Office hours and a few seminars keep the {building} moderately occupied {when} on {weekday}.",
            "{When} on {weekday}, students drift in and out of the {building} between sessions.",
        ],
        (AcademicA, 3) => &[
            "{When} on {weekday}, the {building} runs a full teaching timetable with busy restrooms.",
            "Back-to-back lectures fill the {building} {when} on {weekday}.",
            "{When} on {weekday}, the {building} hosts workshops and crowded corridors between classes.",
        ],
        (AcademicA, 4) => &[
            "{When} on {weekday}, the {building} is packed for final exams with every room in use.",
            "An open-house day draws large crowds of visitors to the {building} {when} on {weekday}.",
            "{When} on {weekday}, a major conference fills every hall of the {building}.",
        ],
        (AcademicB, 0) => &[
            "{When} on {weekday}, the {building} is shut down apart from unattended freezers.",
            "No experiments are running in the {building} {when} on {weekday}; benches sit idle.",
            "{When} on {weekday}, the {building} is secured and unoccupied.",
        ],
        (AcademicB, 1) => &[
            "{When} on {weekday}, a lone researcher checks an overnight culture in the {building}.",
            "Minimal activity in the {building} {when} on {weekday}, with a couple of technicians on call.",
            "{When} on {weekday}, the {building} sees a short maintenance visit.",
        ],
        (AcademicB, 2) => &[
            "{When} on {weekday}, a few research groups run routine experiments in the {building}.",
            "Moderate bench work continues in the {building} {when} on {weekday}.",
            "{When} on {weekday}, graduate students in the {building} wash glassware and prepare samples.",
        ],
        (AcademicB, 3) => &[
            "{When} on {weekday}, most labs in the {building} are running, with cooling loops and sinks in steady use.",
            "A busy research day in the {building} {when} on {weekday}, with autoclaves cycling.",
            "{When} on {weekday}, the {building} hosts a lab training session alongside regular work.",
        ],
        (AcademicB, 4) => &[
            "{When} on {weekday}, every lab in the {building} is running large-scale wash-downs before an inspection.",
            "A grant deadline has the whole {building} running experiments around the clock {when} on {weekday}.",
            "{When} on {weekday}, the {building} hosts a safety drill with emergency showers being tested.",
        ],
        (Dining, 0) => &[
            "{When} on {weekday}, the {building} is closed and the kitchen is dark.",
            "The {building} is closed {when} on {weekday}; no meals are being served.",
            "{When} on {weekday}, the {building} sits closed between service days.",
        ],
        (Dining, 1) => &[
            "{When} on {weekday}, a small prep crew starts setting up in the {building}.",
            "Only a coffee counter is open in the {building} {when} on {weekday}.",
            "{When} on {weekday}, the {building} serves a trickle of late diners.",
        ],
        (Dining, 2) => &[
            "{When} on {weekday}, the {building} runs a regular service with moderate traffic.",
            "A normal meal period in the {building} {when} on {weekday}, with dishwashers running intermittently.",
            "{When} on {weekday}, the {building} serves a steady stream of students.",
        ],
        (Dining, 3) => &[
            "{When} on {weekday}, the {building} is in a busy meal rush with lines at every station.",
            "A dining promotion draws crowds to the {building} {when} on {weekday}.",
            "{When} on {weekday}, the {building} kitchen is cooking and washing at full pace.",
        ],
        (Dining, 4) => &[
            "{When} on {weekday}, the {building} hosts a banquet event with hundreds of guests.",
            "A sports-night celebration packs the {building} {when} on {weekday}, with dish lines running nonstop.",
            "{When} on {weekday}, the {building} caters a campus-wide festival dinner.",
        ],
        _ => &[],
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Renders an event narrative for one region-hour. The text names the
/// building type and the time of day and describes activity matching the
/// level without stating it.
pub fn render_event_text(
    region: u32,
    archetype: Archetype,
    day: usize,
    hour: usize,
    level: u8,
    seed: u64,
) -> EventRecord {
    assert!(level <= 4, "level must be in 0..=4");
    let bank = templates(archetype, level);
    let pick = stream_seed(&[seed, region as u64, day as u64, hour as u64, level as u64]);
    let template = bank[(pick % bank.len() as u64) as usize];
    let when = time_of_day_phrase(hour);
    let text = template
        .replace("{When}", &capitalize(when))
        .replace("{when}", when)
        .replace("{weekday}", weekday_name(day))
        .replace("{building}", archetype.building_type());
    EventRecord { region, building_type: archetype, day, hour, text, level }
}

/// One event per region and hour, using the true region levels.
pub fn build_event_library(
    levels: &RegionLevels,
    region_archetypes: &BTreeMap<u32, Archetype>,
    seed: u64,
) -> Result<Vec<EventRecord>, DemandError> {
    let mut out = Vec::with_capacity(levels.num_regions() * levels.hours());
    for r in 1..=levels.num_regions() as u32 {
        let arch = *region_archetypes.get(&r).ok_or(DemandError::MissingArchetype(r))?;
        for (t, &level) in levels.levels[r as usize - 1].iter().enumerate() {
            out.push(render_event_text(r, arch, t / HOURS_PER_DAY, t % HOURS_PER_DAY, level, seed));
        }
    }
    Ok(out)
}
