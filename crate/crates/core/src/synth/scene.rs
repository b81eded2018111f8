use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every source class that can appear in a scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoundClass {
    Rain,
    CarPassingBy,
    Dog,
    ChirpingBirds,
    Thunder,
    Footsteps,
    CarHorn,
    ChurchBells,
}

impl SoundClass {
    pub const ALL: [SoundClass; 8] = [
        SoundClass::Rain,
        SoundClass::CarPassingBy,
        SoundClass::Dog,
        SoundClass::ChirpingBirds,
        SoundClass::Thunder,
        SoundClass::Footsteps,
        SoundClass::CarHorn,
        SoundClass::ChurchBells,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SoundClass::Rain => "rain",
            SoundClass::CarPassingBy => "car_passing_by",
            SoundClass::Dog => "dog",
            SoundClass::ChirpingBirds => "chirping_birds",
            SoundClass::Thunder => "thunder",
            SoundClass::Footsteps => "footsteps",
            SoundClass::CarHorn => "car_horn",
            SoundClass::ChurchBells => "church_bells",
        }
    }

    /// Noun phrase used in difference descriptions.
    pub fn phrase(self) -> &'static str {
        match self {
            SoundClass::Rain => "rain",
            SoundClass::CarPassingBy => "car sound",
            SoundClass::Dog => "dog bark",
            SoundClass::ChirpingBirds => "bird chirping",
            SoundClass::Thunder => "thunder",
            SoundClass::Footsteps => "footsteps",
            SoundClass::CarHorn => "car horn",
            SoundClass::ChurchBells => "church bells",
        }
    }

    pub fn is_background(self) -> bool {
        matches!(self, SoundClass::Rain | SoundClass::CarPassingBy)
    }
}

impl fmt::Display for SoundClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SoundClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SoundClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownClass(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scene {
    Rain,
    Traffic,
}

impl Scene {
    pub fn background(self) -> SoundClass {
        match self {
            Scene::Rain => SoundClass::Rain,
            Scene::Traffic => SoundClass::CarPassingBy,
        }
    }

    pub fn events(self) -> [SoundClass; 4] {
        use SoundClass::*;
        match self {
            Scene::Rain => [Dog, ChirpingBirds, Thunder, Footsteps],
            Scene::Traffic => [Dog, ChirpingBirds, CarHorn, ChurchBells],
        }
    }

    /// Label order for multi-hot vectors: background first, then events.
    pub fn classes(self) -> [SoundClass; 5] {
        let e = self.events();
        [self.background(), e[0], e[1], e[2], e[3]]
    }

    pub fn label_index(self, class: SoundClass) -> Option<usize> {
        self.classes().iter().position(|&c| c == class)
    }

    pub fn contains(self, class: SoundClass) -> bool {
        self.label_index(class).is_some()
    }

    pub fn name(self) -> &'static str {
        match self {
            Scene::Rain => "rain",
            Scene::Traffic => "traffic",
        }
    }

    pub fn spec(self) -> SceneSpec {
        SceneSpec { name: self, background_class: self.background(), event_classes: self.events().to_vec() }
    }
}

impl FromStr for Scene {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rain" => Ok(Scene::Rain),
            "traffic" => Ok(Scene::Traffic),
            other => Err(Error::InvalidArgument(format!("unknown scene `{other}`"))),
        }
    }
}

/// Scene definition as persisted in a manifest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub name: Scene,
    pub background_class: SoundClass,
    pub event_classes: Vec<SoundClass>,
}

impl SceneSpec {
    /// Checks the spec against the canonical class table of its scene.
    pub fn validate(&self) -> Result<()> {
        if *self != self.name.spec() {
            return Err(Error::Schema(format!(
                "scene `{}` must have background {} and events {:?}",
                self.name.name(),
                self.name.background(),
                self.name.events().map(SoundClass::name)
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_tables() {
        let rain = Scene::Rain.spec();
        assert_eq!(rain.background_class, SoundClass::Rain);
        assert_eq!(
            rain.event_classes.iter().map(|c| c.name()).collect::<Vec<_>>(),
            ["dog", "chirping_birds", "thunder", "footsteps"]
        );
        let traffic = Scene::Traffic.spec();
        assert_eq!(traffic.background_class, SoundClass::CarPassingBy);
        assert_eq!(
            traffic.event_classes.iter().map(|c| c.name()).collect::<Vec<_>>(),
            ["dog", "chirping_birds", "car_horn", "church_bells"]
        );
        for scene in [Scene::Rain, Scene::Traffic] {
            let mut ev = scene.events().to_vec();
            ev.sort();
            ev.dedup();
            assert_eq!(ev.len(), 4);
            scene.spec().validate().unwrap();
        }
    }

    #[test]
    fn class_names_round_trip_and_unknown_is_named() {
        for c in SoundClass::ALL {
            assert_eq!(c.name().parse::<SoundClass>().unwrap(), c);
        }
        match "kazoo".parse::<SoundClass>() {
            Err(Error::UnknownClass(name)) => assert_eq!(name, "kazoo"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tampered_scene_spec_fails_validation() {
        let mut s = Scene::Rain.spec();
        s.event_classes[3] = SoundClass::CarHorn;
        assert!(s.validate().is_err());
    }
}
