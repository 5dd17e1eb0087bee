//! Procedural test scenes. Each returns a [`SceneDesc`] so it can be dumped as
//! JSON and edited.

use crate::color::Rgb;
use crate::math::Vec3;
use crate::scene::camera::Camera;
use crate::scene::file::{
    DynamicStateDesc, EmissionOverride, EnvSource, MaterialDesc, MaterialKind, PointLightDesc,
    PointLightOverride, PrimitiveDesc, SceneDesc, ShapeDesc,
};

pub const NAMES: &[&str] = &[
    "cornell",
    "cornell-sphere",
    "cornell-light",
    "cornell-plate",
    "two-room",
    "furnace",
    "furnace-box",
    "constant-box",
    "env-micro",
    "env-micro-identical",
];

pub fn by_name(name: &str) -> Option<SceneDesc> {
    Some(match name {
        "cornell" => cornell(),
        "cornell-sphere" => cornell_sphere(),
        "cornell-light" => cornell_light(),
        "cornell-plate" => cornell_plate(),
        "two-room" => two_room(),
        "furnace" => furnace(),
        "furnace-box" => furnace_box(),
        "constant-box" => constant_box(),
        "env-micro" => env_micro(),
        "env-micro-identical" => env_micro_identical(),
        _ => return None,
    })
}

fn v(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

fn lambert(albedo: Rgb) -> MaterialDesc {
    MaterialDesc { name: None, albedo, emission: Rgb::ZERO, kind: MaterialKind::Lambertian }
}

fn emitter(albedo: Rgb, emission: Rgb) -> MaterialDesc {
    MaterialDesc { name: None, albedo, emission, kind: MaterialKind::Lambertian }
}

fn quad(corner: Vec3, edge_u: Vec3, edge_v: Vec3, material: usize) -> PrimitiveDesc {
    PrimitiveDesc { shape: ShapeDesc::Quad { corner, edge_u, edge_v }, material, dynamic: false }
}

fn sphere(center: Vec3, radius: f64, material: usize, dynamic: bool) -> PrimitiveDesc {
    PrimitiveDesc { shape: ShapeDesc::Sphere { center, radius }, material, dynamic }
}

const WHITE: usize = 0;
const RED: usize = 1;
const GREEN: usize = 2;
const LIGHT: usize = 3;
/// Index of the ceiling light quad in [`cornell`].
pub const CORNELL_LIGHT_PRIMITIVE: usize = 5;

/// Closed-front-open box `[-1,1] x [0,2] x [-1,1]`, ceiling light, one static sphere.
pub fn cornell() -> SceneDesc {
    let materials = vec![
        lambert(Rgb::splat(0.7)),
        lambert(Rgb::new(0.63, 0.065, 0.05)),
        lambert(Rgb::new(0.14, 0.45, 0.09)),
        emitter(Rgb::ZERO, Rgb::splat(12.0)),
    ];
    let primitives = vec![
        quad(v(-1.0, 0.0, -1.0), v(0.0, 0.0, 2.0), v(2.0, 0.0, 0.0), WHITE),
        quad(v(-1.0, 2.0, -1.0), v(2.0, 0.0, 0.0), v(0.0, 0.0, 2.0), WHITE),
        quad(v(-1.0, 0.0, -1.0), v(2.0, 0.0, 0.0), v(0.0, 2.0, 0.0), WHITE),
        quad(v(-1.0, 0.0, -1.0), v(0.0, 2.0, 0.0), v(0.0, 0.0, 2.0), RED),
        quad(v(1.0, 0.0, -1.0), v(0.0, 0.0, 2.0), v(0.0, 2.0, 0.0), GREEN),
        quad(v(-0.25, 1.98, -0.25), v(0.5, 0.0, 0.0), v(0.0, 0.0, 0.5), LIGHT),
        sphere(v(-0.45, 0.35, -0.3), 0.35, WHITE, false),
    ];
    SceneDesc {
        camera: Camera {
            position: v(0.0, 1.0, 3.9),
            look_at: v(0.0, 1.0, 0.0),
            up: v(0.0, 1.0, 0.0),
            vfov: 38.0,
            width: 64,
            height: 64,
        },
        materials,
        primitives,
        point_lights: Vec::new(),
        environment: None,
        dynamic_state: DynamicStateDesc::default(),
    }
}

/// [`cornell`] plus a small dynamic diffuse sphere on the floor.
pub fn cornell_sphere() -> SceneDesc {
    let mut desc = cornell();
    desc.primitives.push(sphere(v(0.45, 0.2, 0.35), 0.2, WHITE, true));
    desc
}

/// [`cornell`] with a brighter ceiling light, a moved point light and a small
/// dynamic emitter; no dynamic occluders.
pub fn cornell_light() -> SceneDesc {
    let mut desc = cornell();
    desc.materials.push(emitter(Rgb::splat(0.2), Rgb::new(4.0, 3.0, 1.0)));
    let glow = desc.materials.len() - 1;
    desc.primitives.push(sphere(v(0.5, 1.3, -0.4), 0.08, glow, true));
    desc.point_lights.push(PointLightDesc { position: v(0.4, 1.6, 0.2), intensity: Rgb::splat(0.8) });
    desc.dynamic_state = DynamicStateDesc {
        emission: vec![EmissionOverride {
            primitive: CORNELL_LIGHT_PRIMITIVE,
            emission: Rgb::new(16.0, 15.0, 13.0),
        }],
        point_lights: vec![PointLightOverride {
            index: 0,
            position: Some(v(-0.4, 1.5, 0.3)),
            intensity: Some(Rgb::splat(1.2)),
        }],
        environment: None,
    };
    desc
}

/// [`cornell`] with a dynamic horizontal plate just under the light.
pub fn cornell_plate() -> SceneDesc {
    let mut desc = cornell();
    desc.primitives.push(PrimitiveDesc {
        shape: ShapeDesc::Quad {
            corner: v(0.0, 1.5, -0.1),
            edge_u: v(0.0, 0.0, 0.5),
            edge_v: v(0.5, 0.0, 0.0),
        },
        material: WHITE,
        dynamic: true,
    });
    desc
}

/// Two rooms joined by a doorway; the light is in the far room and a dynamic
/// plate partially blocks the doorway.
pub fn two_room() -> SceneDesc {
    let materials = vec![
        lambert(Rgb::splat(0.6)),
        lambert(Rgb::new(0.6, 0.3, 0.2)),
        lambert(Rgb::new(0.2, 0.35, 0.6)),
        emitter(Rgb::ZERO, Rgb::splat(20.0)),
    ];
    let (wall, a, b) = (0, 1, 2);
    let door_z = 0.4;
    let door_y = 1.4;
    let mut primitives = vec![
        // floor and ceiling
        quad(v(-2.0, 0.0, -1.0), v(0.0, 0.0, 2.0), v(4.0, 0.0, 0.0), wall),
        quad(v(-2.0, 2.0, -1.0), v(4.0, 0.0, 0.0), v(0.0, 0.0, 2.0), wall),
        // back and front walls
        quad(v(-2.0, 0.0, -1.0), v(4.0, 0.0, 0.0), v(0.0, 2.0, 0.0), wall),
        quad(v(-2.0, 0.0, 1.0), v(0.0, 2.0, 0.0), v(4.0, 0.0, 0.0), wall),
        // end walls
        quad(v(-2.0, 0.0, -1.0), v(0.0, 2.0, 0.0), v(0.0, 0.0, 2.0), a),
        quad(v(2.0, 0.0, -1.0), v(0.0, 0.0, 2.0), v(0.0, 2.0, 0.0), b),
        // partition at x = 0 with a doorway
        quad(v(0.0, 0.0, -1.0), v(0.0, 0.0, 1.0 - door_z), v(0.0, 2.0, 0.0), wall),
        quad(v(0.0, 0.0, door_z), v(0.0, 0.0, 1.0 - door_z), v(0.0, 2.0, 0.0), wall),
        quad(v(0.0, door_y, -door_z), v(0.0, 0.0, 2.0 * door_z), v(0.0, 2.0 - door_y, 0.0), wall),
        // light in the far room
        quad(v(-1.3, 1.98, -0.3), v(0.6, 0.0, 0.0), v(0.0, 0.0, 0.6), 3),
    ];
    primitives.push(PrimitiveDesc {
        shape: ShapeDesc::Quad {
            corner: v(-0.3, 0.2, -0.5),
            edge_u: v(0.0, 1.0, 0.0),
            edge_v: v(0.0, 0.0, 0.6),
        },
        material: wall,
        dynamic: true,
    });
    SceneDesc {
        camera: Camera {
            position: v(1.9, 1.0, 0.0),
            look_at: v(-1.0, 0.7, 0.0),
            up: v(0.0, 1.0, 0.0),
            vfov: 60.0,
            width: 64,
            height: 64,
        },
        materials,
        primitives,
        point_lights: Vec::new(),
        environment: None,
        dynamic_state: DynamicStateDesc::default(),
    }
}

/// Diffuse sphere with albedo 0.5 and emission 0.5 under a unit constant
/// environment. Every pixel converges to 1.
pub fn furnace() -> SceneDesc {
    SceneDesc {
        camera: Camera {
            position: v(0.0, 0.0, 3.0),
            look_at: Vec3::ZERO,
            up: v(0.0, 1.0, 0.0),
            vfov: 40.0,
            width: 16,
            height: 16,
        },
        materials: vec![emitter(Rgb::splat(0.5), Rgb::splat(0.5))],
        primitives: vec![sphere(Vec3::ZERO, 1.0, 0, false)],
        point_lights: Vec::new(),
        environment: Some(EnvSource::Constant(Rgb::ONE)),
        dynamic_state: DynamicStateDesc::default(),
    }
}

fn closed_cube(material: usize) -> Vec<PrimitiveDesc> {
    vec![
        quad(v(-1.0, 0.0, -1.0), v(0.0, 0.0, 2.0), v(2.0, 0.0, 0.0), material),
        quad(v(-1.0, 2.0, -1.0), v(2.0, 0.0, 0.0), v(0.0, 0.0, 2.0), material),
        quad(v(-1.0, 0.0, -1.0), v(2.0, 0.0, 0.0), v(0.0, 2.0, 0.0), material),
        quad(v(-1.0, 0.0, 1.0), v(0.0, 2.0, 0.0), v(2.0, 0.0, 0.0), material),
        quad(v(-1.0, 0.0, -1.0), v(0.0, 2.0, 0.0), v(0.0, 0.0, 2.0), material),
        quad(v(1.0, 0.0, -1.0), v(0.0, 0.0, 2.0), v(0.0, 2.0, 0.0), material),
    ]
}

fn inside_camera() -> Camera {
    Camera {
        position: v(0.0, 1.0, 0.9),
        look_at: v(0.0, 1.0, 0.0),
        up: v(0.0, 1.0, 0.0),
        vfov: 70.0,
        width: 16,
        height: 16,
    }
}

/// Closed cube lined with albedo 0.5, emission 0.5 and a static sphere of the
/// same material: radiance is 1 everywhere inside.
pub fn furnace_box() -> SceneDesc {
    let mut primitives = closed_cube(0);
    primitives.push(sphere(v(0.2, 0.5, -0.3), 0.4, 0, false));
    SceneDesc {
        camera: inside_camera(),
        materials: vec![emitter(Rgb::splat(0.5), Rgb::splat(0.5))],
        primitives,
        point_lights: Vec::new(),
        environment: None,
        dynamic_state: DynamicStateDesc::default(),
    }
}

/// Closed cube with black, unit-emission walls: radiance 1 with zero variance.
pub fn constant_box() -> SceneDesc {
    let mut primitives = closed_cube(0);
    primitives.push(sphere(v(-0.3, 0.6, -0.2), 0.3, 0, false));
    SceneDesc {
        camera: inside_camera(),
        materials: vec![emitter(Rgb::ZERO, Rgb::ONE)],
        primitives,
        point_lights: Vec::new(),
        environment: None,
        dynamic_state: DynamicStateDesc::default(),
    }
}

/// Old and new texels of the 2x2 environment used by [`env_micro`].
pub const ENV_MICRO_OLD: [f64; 4] = [2.0, 3.0, 0.0, 5.0];
pub const ENV_MICRO_NEW: [f64; 4] = [3.0, 1.0, 3.0, 1.0];

/// Diffuse floor lit only by a 2x2 environment whose texels change between
/// light states; the absolute texel deltas are 1, 2, 3, 4.
pub fn env_micro() -> SceneDesc {
    let texels = |t: [f64; 4]| EnvSource::Texels {
        width: 2,
        height: 2,
        texels: t.iter().map(|&x| Rgb::splat(x)).collect(),
    };
    SceneDesc {
        camera: Camera {
            position: v(0.0, 1.5, 2.5),
            look_at: v(0.0, 0.0, 0.0),
            up: v(0.0, 1.0, 0.0),
            vfov: 50.0,
            width: 16,
            height: 16,
        },
        materials: vec![lambert(Rgb::splat(0.5))],
        primitives: vec![quad(v(-1.0, 0.0, -1.0), v(0.0, 0.0, 2.0), v(2.0, 0.0, 0.0), 0)],
        point_lights: Vec::new(),
        environment: Some(texels(ENV_MICRO_OLD)),
        dynamic_state: DynamicStateDesc {
            environment: Some(texels(ENV_MICRO_NEW)),
            ..Default::default()
        },
    }
}

/// [`env_micro`] with both light states equal.
pub fn env_micro_identical() -> SceneDesc {
    let mut desc = env_micro();
    desc.dynamic_state = DynamicStateDesc::default();
    desc
}
