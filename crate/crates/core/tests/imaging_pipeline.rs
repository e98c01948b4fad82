use ledcam::camera::{
    band_width_px, expected_blob_diameter_px, render, CameraParams, Emitter, LinkGeometry, RenderOptions, TxParams,
};
use ledcam::codec::{build_packet, FramingConfig, Payload};
use ledcam::frame::Frame;
use ledcam::imaging::{
    decode_frame, detect_blobs, enclosing_circle, BinaryFrame, DecodeConfig, DecodeFailure, RadiusEstimator,
};
use proptest::prelude::*;
use rayon::prelude::*;

fn cfg() -> DecodeConfig {
    DecodeConfig::with_band_width(band_width_px(&TxParams::default(), &CameraParams::default()))
}

fn one_led(v: u64, d: f64, iso: u32, noise: f64, seed: u64) -> (Payload, Frame) {
    let p = Payload::from_value(v, 8).unwrap();
    let cam = CameraParams::with_iso(iso);
    let e = Emitter {
        stream: build_packet(&p, &FramingConfig::default()).unwrap(),
        geom: LinkGeometry::centered(d, &cam),
    };
    let f = render(&[e], &TxParams::default(), &cam, &RenderOptions::new(noise, seed)).unwrap();
    (p, f)
}

#[test]
fn every_payload_decodes_noiseless() {
    let failed: Vec<u64> = (0..256u64)
        .into_par_iter()
        .filter(|&v| {
            let (p, f) = one_led(v, 0.064, 100, 0.0, v * 7 + 1);
            let out = decode_frame(&f, &cfg()).unwrap();
            !(out.len() == 1 && out[0].result.as_ref() == Ok(&p))
        })
        .collect();
    assert!(failed.is_empty(), "{failed:?}");
}

#[test]
fn measured_diameter_tracks_model() {
    let tx = TxParams::default();
    for iso in [100, 800] {
        let cam = CameraParams::with_iso(iso);
        for d in [0.12, 0.2, 0.35, 0.6, 1.0] {
            let expect = expected_blob_diameter_px(&LinkGeometry::centered(d, &cam), &tx, &cam).unwrap();
            let (_, f) = one_led(0x5a, d, iso, 1.0, 3);
            let blobs = decode_frame(&f, &cfg()).unwrap();
            assert_eq!(blobs.len(), 1, "iso {iso} d {d}");
            let got = blobs[0].blob.diameter_px();
            assert!((got - expect).abs() <= 4.0, "iso {iso} d {d}: {got} vs {expect}");
        }
    }
}

#[test]
fn blank_frame_has_no_blobs() {
    for noise in [0.0, 4.0] {
        let cam = CameraParams::default();
        let f = render(&[], &TxParams::default(), &cam, &RenderOptions::new(noise, 5)).unwrap();
        assert!(decode_frame(&f, &cfg()).unwrap().is_empty());
    }
}

#[test]
fn small_blob_is_found_but_not_decoded() {
    // well under the 276 px bound
    let (_, f) = one_led(0x11, 0.5, 100, 2.0, 8);
    let out = decode_frame(&f, &cfg()).unwrap();
    assert_eq!(out.len(), 1);
    assert!(matches!(
        out[0].result,
        Err(DecodeFailure::Codec(_) | DecodeFailure::Imaging(_))
    ));
}

#[test]
fn two_leds_decode_independently() {
    let cam = CameraParams::default();
    let framing = FramingConfig::default();
    let payloads = [0x96u64, 0x0f];
    let emitters: Vec<Emitter> = payloads
        .iter()
        .zip([320.0, 960.0])
        .map(|(&v, x)| Emitter {
            stream: build_packet(&Payload::from_value(v, 8).unwrap(), &framing).unwrap(),
            geom: LinkGeometry {
                distance_m: 0.072,
                center_px: (x, 359.5),
            },
        })
        .collect();
    let f = render(&emitters, &TxParams::default(), &cam, &RenderOptions::new(1.0, 21)).unwrap();
    let mut out = decode_frame(&f, &cfg()).unwrap();
    assert_eq!(out.len(), 2);
    out.sort_by(|a, b| a.blob.center_x.total_cmp(&b.blob.center_x));
    for (d, v) in out.iter().zip(payloads) {
        assert_eq!(d.result.as_ref().unwrap().value(), v);
    }
}

#[test]
fn estimated_clock_matches_known_clock() {
    let (p, f) = one_led(0xe1, 0.064, 100, 0.0, 2);
    let est = DecodeConfig {
        band_width_px: None,
        ..cfg()
    };
    let out = decode_frame(&f, &est).unwrap();
    assert_eq!(out[0].result.as_ref(), Ok(&p));
}

fn disc(r: f64, cx: f64, cy: f64) -> BinaryFrame {
    let f = Frame::from_fn(500, 500, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        if dx * dx + dy * dy <= r * r {
            255
        } else {
            0
        }
    });
    BinaryFrame::new(f).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn disc_radius_within_two_px(r in 20.0f64..200.0, ox in -20.0f64..20.0, oy in -20.0f64..20.0) {
        let (cx, cy) = (250.0 + ox, 250.0 + oy);
        let blobs = detect_blobs(&disc(r, cx, cy), 100, 12.0);
        prop_assert_eq!(blobs.len(), 1);
        let b = blobs[0];
        prop_assert!((b.radius_px - r).abs() <= 2.0, "{} vs {}", b.radius_px, r);
        prop_assert!((b.center_x - cx).abs() <= 1.0 && (b.center_y - cy).abs() <= 1.0);
    }

    #[test]
    fn enclosing_circle_covers_points(pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..60)) {
        let (ccx, ccy, cr) = enclosing_circle(&pts);
        for &(x, y) in &pts {
            let d = ((x - ccx).powi(2) + (y - ccy).powi(2)).sqrt();
            prop_assert!(d <= cr + 1e-7);
        }
        // no smaller circle about the same centre covers everything
        let far = pts
            .iter()
            .map(|&(x, y)| ((x - ccx).powi(2) + (y - ccy).powi(2)).sqrt())
            .fold(0.0, f64::max);
        prop_assert!((far - cr).abs() < 1e-7);
    }
}

#[test]
fn centroid_estimator_is_available() {
    let b = disc(60.0, 250.0, 250.0);
    let opts = ledcam::imaging::DetectOptions {
        estimator: RadiusEstimator::CentroidMaxDistance,
        ..ledcam::imaging::DetectOptions::for_band_width(12.0)
    };
    let blobs = ledcam::imaging::detect_blobs_with(&b, &opts);
    assert!((blobs[0].radius_px - 60.0).abs() <= 2.0);
}
