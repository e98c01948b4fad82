use ledcam::camera::{
    band_width_px, expected_blob_diameter_px, render, synthesize_frame, CameraParams, Emitter, LinkGeometry,
    RenderOptions, TxParams,
};
use ledcam::codec::{build_packet, FramingConfig, Payload, SymbolStream};
use ledcam::frame::Frame;
use proptest::prelude::*;

fn packet(v: u64) -> SymbolStream {
    build_packet(&Payload::from_value(v, 8).unwrap(), &FramingConfig::default()).unwrap()
}

/// Bright run lengths in the raw centre column, clipped end runs dropped.
fn bright_runs(frame: &Frame, x: usize) -> Vec<usize> {
    let col: Vec<bool> = (0..frame.height()).map(|y| frame.get(x, y) > 128).collect();
    let mut runs = Vec::new();
    let mut y = 0;
    while y < col.len() {
        if col[y] {
            let s = y;
            while y < col.len() && col[y] {
                y += 1;
            }
            runs.push(y - s);
        } else {
            y += 1;
        }
    }
    if runs.len() > 2 {
        runs.pop();
        runs.remove(0);
    }
    runs
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pinhole_identity_at_iso_100(d in 0.001f64..5.0) {
        let cam = CameraParams::default();
        let tx = TxParams::default();
        let px = expected_blob_diameter_px(&LinkGeometry::centered(d, &cam), &tx, &cam).unwrap();
        let lhs = px * cam.pixel_pitch_m * (d - cam.focal_length_m);
        let rhs = tx.led_radius_m * cam.focal_length_m;
        prop_assert!(((lhs - rhs) / rhs).abs() < 1e-12);
    }

    #[test]
    fn diameter_monotone(d in 0.01f64..2.0, step in 0.001f64..1.0) {
        let tx = TxParams::default();
        let at = |iso: u32, dist: f64| {
            let cam = CameraParams::with_iso(iso);
            expected_blob_diameter_px(&LinkGeometry::centered(dist, &cam), &tx, &cam).unwrap()
        };
        prop_assert!(at(100, d + step) < at(100, d));
        prop_assert!(at(100, d) < at(400, d));
        prop_assert!(at(400, d) < at(800, d));
    }

    #[test]
    fn band_width_scales_inversely(f in 500.0f64..20000.0) {
        let cam = CameraParams::default();
        let tx = TxParams { mod_freq_hz: f, ..Default::default() };
        let w = band_width_px(&tx, &cam);
        prop_assert!((w * f * 2.0 * cam.readout_time_s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn bright_runs_do_not_depend_on_distance() {
    let cam = CameraParams::default();
    let tx = TxParams {
        duty_cycle: 0.5,
        ..Default::default()
    };
    let mut shortest = Vec::new();
    for d in [0.10, 0.15, 0.25, 0.40] {
        let geom = LinkGeometry::centered(d, &cam);
        let f = render(
            &[Emitter {
                stream: packet(0x00),
                geom,
            }],
            &tx,
            &cam,
            &RenderOptions::new(0.0, 1).without_bloom(),
        )
        .unwrap();
        shortest.push(*bright_runs(&f, geom.center_px.0 as usize).iter().min().unwrap());
    }
    assert!(shortest.iter().all(|&s| (11..=13).contains(&s)), "{shortest:?}");
}

#[test]
fn lower_duty_shrinks_bright_bands() {
    let cam = CameraParams::default();
    let geom = LinkGeometry::centered(0.12, &cam);
    let mean_bright = |duty: f64| {
        let tx = TxParams {
            duty_cycle: duty,
            ..Default::default()
        };
        let f = render(
            &[Emitter {
                stream: packet(0x00),
                geom,
            }],
            &tx,
            &cam,
            &RenderOptions::new(0.0, 4).without_bloom(),
        )
        .unwrap();
        let runs = bright_runs(&f, geom.center_px.0 as usize);
        runs.iter().sum::<usize>() as f64 / runs.len() as f64
    };
    let (d50, d40) = (mean_bright(0.5), mean_bright(0.4));
    assert!(d40 < d50, "{d40} vs {d50}");
    // the falling edge moves in by (1 - 2d) of a band: 2.4 rows at 40%
    assert!((d50 - d40 - 2.4).abs() < 1.0, "{d40} vs {d50}");
}

#[test]
fn synthesis_is_deterministic() {
    let cam = CameraParams::with_iso(400);
    let geom = LinkGeometry::centered(0.2, &cam);
    let a = synthesize_frame(&packet(0x42), &geom, &TxParams::default(), &cam, 3.0, 77).unwrap();
    let b = synthesize_frame(&packet(0x42), &geom, &TxParams::default(), &cam, 3.0, 77).unwrap();
    let c = synthesize_frame(&packet(0x42), &geom, &TxParams::default(), &cam, 3.0, 78).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn out_of_frame_blob_is_rejected() {
    let cam = CameraParams::default();
    // ~870 px blob does not fit 720 rows
    let geom = LinkGeometry::centered(0.05, &cam);
    assert!(synthesize_frame(&packet(1), &geom, &TxParams::default(), &cam, 0.0, 0).is_err());
}
