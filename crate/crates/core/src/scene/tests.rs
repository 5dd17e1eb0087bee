use super::*;
use crate::scene::file::{DynamicStateDesc, EmissionOverride, EnvSource, MaterialDesc, PrimitiveDesc, ShapeDesc};
use proptest::prelude::*;

fn camera() -> Camera {
    Camera {
        position: Vec3::new(0.0, 0.0, -5.0),
        look_at: Vec3::ZERO,
        up: Vec3::new(0.0, 1.0, 0.0),
        vfov: 40.0,
        width: 8,
        height: 8,
    }
}

fn material(albedo: f64, emission: f64) -> MaterialDesc {
    MaterialDesc {
        name: None,
        albedo: Rgb::splat(albedo),
        emission: Rgb::splat(emission),
        kind: MaterialKind::Lambertian,
    }
}

fn desc(primitives: Vec<PrimitiveDesc>) -> SceneDesc {
    SceneDesc {
        camera: camera(),
        materials: vec![material(0.5, 0.0), material(0.0, 1.0)],
        primitives,
        point_lights: vec![],
        environment: None,
        dynamic_state: DynamicStateDesc::default(),
    }
}

fn unit_sphere(dynamic: bool) -> PrimitiveDesc {
    PrimitiveDesc {
        shape: ShapeDesc::Sphere { center: Vec3::ZERO, radius: 1.0 },
        material: 0,
        dynamic,
    }
}

fn wall_at_z2() -> PrimitiveDesc {
    PrimitiveDesc {
        shape: ShapeDesc::Quad {
            corner: Vec3::new(-10.0, -10.0, 2.0),
            edge_u: Vec3::new(0.0, 20.0, 0.0),
            edge_v: Vec3::new(20.0, 0.0, 0.0),
        },
        material: 0,
        dynamic: false,
    }
}

fn ray() -> Ray {
    Ray::new(Vec3::new(0.0, 0.0, -5.0), Vec3::new(0.0, 0.0, 1.0))
}

#[test]
fn static_sphere_hit() {
    let scene = Scene::from_desc(desc(vec![unit_sphere(false)]), None).unwrap();
    let hit = scene.intersect(&ray(), IntersectMode::IncludeDynamic).unwrap();
    assert!((hit.t - 4.0).abs() < 1e-12);
    assert!((hit.normal - Vec3::new(0.0, 0.0, -1.0)).length() < 1e-12);
    assert!(!hit.is_dynamic);
}

#[test]
fn dynamic_sphere_is_skipped() {
    let scene = Scene::from_desc(desc(vec![unit_sphere(true)]), None).unwrap();
    assert!(scene.intersect(&ray(), IntersectMode::SkipDynamic).is_none());
    let hit = scene.intersect(&ray(), IntersectMode::IncludeDynamic).unwrap();
    assert!(hit.is_dynamic);
}

#[test]
fn skip_reaches_wall_behind_dynamic_sphere() {
    let scene = Scene::from_desc(desc(vec![unit_sphere(true), wall_at_z2()]), None).unwrap();
    let hit = scene.intersect(&ray(), IntersectMode::SkipDynamic).unwrap();
    assert!((hit.t - 7.0).abs() < 1e-12);
    let split = scene.intersect_split(&ray());
    assert!(split.crossed_dynamic());
    assert!((split.nearest().unwrap().t - 4.0).abs() < 1e-12);
}

#[test]
fn emission_per_state() {
    let mut d = desc(vec![PrimitiveDesc {
        shape: ShapeDesc::Sphere { center: Vec3::ZERO, radius: 1.0 },
        material: 1,
        dynamic: false,
    }]);
    d.dynamic_state.emission.push(EmissionOverride { primitive: 0, emission: Rgb::new(2.0, 1.0, 1.0) });
    d.environment = Some(EnvSource::Constant(Rgb::splat(0.5)));
    let scene = Scene::from_desc(d, None).unwrap();
    let r = ray();
    let hit = scene.intersect(&r, IntersectMode::IncludeDynamic).unwrap();
    assert_eq!(scene.eval_emission(&r, Some(&hit), LightStateId::Dynamic), Rgb::new(2.0, 1.0, 1.0));
    assert_eq!(scene.eval_emission(&r, Some(&hit), LightStateId::Static), Rgb::ONE);
    let miss = Ray::new(Vec3::new(0.0, 5.0, -5.0), Vec3::new(0.0, 0.0, 1.0));
    for s in [LightStateId::Static, LightStateId::Dynamic] {
        assert_eq!(scene.eval_emission(&miss, None, s), Rgb::splat(0.5));
    }

    let plain = Scene::from_desc(desc(vec![unit_sphere(false)]), None).unwrap();
    let hit = plain.intersect(&r, IntersectMode::IncludeDynamic).unwrap();
    assert_eq!(plain.eval_emission(&r, Some(&hit), LightStateId::Dynamic), Rgb::ZERO);
}

#[test]
fn validation_errors() {
    let mut bad = desc(vec![unit_sphere(false)]);
    bad.primitives[0].material = 7;
    assert!(matches!(Scene::from_desc(bad, None), Err(Error::Scene(_))));

    let mut bad = desc(vec![PrimitiveDesc {
        shape: ShapeDesc::Triangle {
            vertices: [Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)],
            normals: None,
        },
        material: 0,
        dynamic: false,
    }]);
    assert!(Scene::from_desc(bad.clone(), None).is_err());
    bad.primitives[0].shape = ShapeDesc::Sphere { center: Vec3::ZERO, radius: 0.0 };
    assert!(Scene::from_desc(bad.clone(), None).is_err());
    bad.primitives[0] = unit_sphere(false);
    bad.materials[0].albedo = Rgb::new(1.2, 0.5, 0.5);
    assert!(Scene::from_desc(bad, None).is_err());
}

#[test]
fn uniform_sphere_light_pdf_matches_sampling() {
    // Sampled area-light pdf times selection must equal the pdf reported for
    // a BSDF ray hitting the same point.
    let d = desc(vec![PrimitiveDesc {
        shape: ShapeDesc::Sphere { center: Vec3::new(0.0, 3.0, 0.0), radius: 0.5 },
        material: 1,
        dynamic: false,
    }]);
    let scene = Scene::from_desc(d, None).unwrap();
    let origin = Vec3::ZERO;
    let ls = scene.sample_light(0, origin, LightStateId::Static, true, 0.45, 0.7).unwrap();
    let r = Ray::new(origin, ls.direction);
    let hit = scene.intersect(&r, IntersectMode::IncludeDynamic).unwrap();
    assert!((hit.t - ls.distance).abs() < 1e-9);
    let pdf = scene.area_light_pdf(origin, &hit, r.dir);
    assert!((pdf - ls.pdf * scene.light_selection_pdf()).abs() < 1e-9 * pdf);
}

fn arb_vec(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn arb_prim(dynamic: bool) -> impl Strategy<Value = PrimitiveDesc> {
    prop_oneof![
        (arb_vec(2.0), 0.1f64..1.0).prop_map(move |(c, r)| PrimitiveDesc {
            shape: ShapeDesc::Sphere { center: c, radius: r },
            material: 0,
            dynamic,
        }),
        (arb_vec(2.0), arb_vec(1.5), arb_vec(1.5))
            .prop_filter("non-degenerate", |(_, u, w)| u.cross(*w).length() > 1e-3)
            .prop_map(move |(c, u, w)| PrimitiveDesc {
                shape: ShapeDesc::Quad { corner: c, edge_u: u, edge_v: w },
                material: 0,
                dynamic,
            }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn skip_mode_matches_static_only_scene(
        statics in prop::collection::vec(arb_prim(false), 1..5),
        dynamics in prop::collection::vec(arb_prim(true), 1..4),
        origin in arb_vec(4.0),
        dir in arb_vec(1.0).prop_filter("nonzero", |d| d.length() > 1e-3),
    ) {
        let mut prims = statics.clone();
        prims.extend(dynamics);
        let full = Scene::from_desc(desc(prims), None).unwrap();
        let only = Scene::from_desc(desc(statics), None).unwrap();
        let r = Ray::new(origin, dir.normalized());
        let skip = full.intersect(&r, IntersectMode::SkipDynamic);
        prop_assert_eq!(skip, only.intersect(&r, IntersectMode::IncludeDynamic));
        let incl = full.intersect(&r, IntersectMode::IncludeDynamic);
        if let Some(s) = skip {
            let i = incl.expect("a static hit is also visible with dynamics included");
            prop_assert!(s.t >= i.t);
        }
        if let Some(i) = incl {
            prop_assert!((i.normal.length() - 1.0).abs() < 1e-6);
            prop_assert!(i.t.is_finite() && i.t > 0.0);
        }
    }

    #[test]
    fn equal_states_give_equal_emission(e in 0.0f64..5.0, dir in arb_vec(1.0).prop_filter("nonzero", |d| d.length() > 1e-3)) {
        let mut d = desc(vec![unit_sphere(false)]);
        d.materials[0].emission = Rgb::splat(e);
        d.environment = Some(EnvSource::Constant(Rgb::splat(0.25)));
        let scene = Scene::from_desc(d, None).unwrap();
        prop_assert!(scene.light_states_equal());
        let r = Ray::new(Vec3::new(0.0, 0.0, -5.0) + dir, (Vec3::ZERO - (Vec3::new(0.0, 0.0, -5.0) + dir)).normalized());
        let hit = scene.intersect(&r, IntersectMode::IncludeDynamic);
        prop_assert_eq!(
            scene.eval_emission(&r, hit.as_ref(), LightStateId::Static),
            scene.eval_emission(&r, hit.as_ref(), LightStateId::Dynamic)
        );
    }
}
