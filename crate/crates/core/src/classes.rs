//! Semantic class registry: receptacle and object categories the simulator
//! and the agent share. Scene configs refer to classes by name; everything
//! internal uses the compact `ClassId`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassId(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SizeClass {
    Small,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassKind {
    Receptacle,
    Object,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub kind: ClassKind,
    /// Receptacles: top surface height in meters. Objects: unused (0).
    pub surface_height: f64,
    /// Objects: footprint/graspability class. Receptacles: Small is unused.
    pub size: SizeClass,
    /// Receptacle footprint side lengths used by the scene generator.
    pub footprint_min: i32,
    pub footprint_max: i32,
}

/// Class inventory. The default set covers the confusion-pair vocabulary the
/// perception model needs plus a few portable objects of both sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRegistry {
    specs: Vec<ClassSpec>,
}

fn rec(name: &str, height: f64, fp_min: i32, fp_max: i32) -> ClassSpec {
    ClassSpec {
        name: name.to_string(),
        kind: ClassKind::Receptacle,
        surface_height: height,
        size: SizeClass::Large,
        footprint_min: fp_min,
        footprint_max: fp_max,
    }
}

fn obj(name: &str, size: SizeClass) -> ClassSpec {
    ClassSpec {
        name: name.to_string(),
        kind: ClassKind::Object,
        surface_height: 0.0,
        size,
        footprint_min: 1,
        footprint_max: 1,
    }
}

impl Default for ClassRegistry {
    fn default() -> Self {
        ClassRegistry {
            specs: vec![
                rec("table", 0.75, 3, 4),
                rec("chair", 0.45, 2, 2),
                rec("cabinet", 0.90, 3, 4),
                rec("sofa", 0.50, 2, 3),
                rec("counter", 0.85, 3, 4),
                rec("drawer", 0.70, 2, 2),
                obj("cup", SizeClass::Small),
                obj("bottle", SizeClass::Small),
                obj("knife", SizeClass::Small),
                obj("backpack", SizeClass::Large),
                obj("box", SizeClass::Large),
            ],
        }
    }
}

impl ClassRegistry {
    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn spec(&self, id: ClassId) -> &ClassSpec {
        &self.specs[id.0 as usize]
    }

    pub fn name(&self, id: ClassId) -> &str {
        &self.spec(id).name
    }

    pub fn lookup(&self, name: &str) -> Option<ClassId> {
        self.specs
            .iter()
            .position(|s| s.name == name)
            .map(|i| ClassId(i as u16))
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.specs.len()).map(|i| ClassId(i as u16))
    }

    pub fn receptacle_ids(&self) -> Vec<ClassId> {
        self.ids()
            .filter(|id| self.spec(*id).kind == ClassKind::Receptacle)
            .collect()
    }

    pub fn object_ids(&self) -> Vec<ClassId> {
        self.ids()
            .filter(|id| self.spec(*id).kind == ClassKind::Object)
            .collect()
    }

    /// Class the perception model may confuse with `id`, if any.
    /// Pairs are symmetric: chair/sofa, table/counter, cabinet/drawer.
    pub fn confusion_partner(&self, id: ClassId) -> Option<ClassId> {
        const PAIRS: [(&str, &str); 3] = [
            ("chair", "sofa"),
            ("table", "counter"),
            ("cabinet", "drawer"),
        ];
        let name = self.name(id);
        for (a, b) in PAIRS {
            if name == a {
                return self.lookup(b);
            }
            if name == b {
                return self.lookup(a);
            }
        }
        None
    }
}
