//! Preset configurations reproducing the standard soliton studies.

use serde_json::{json, Value};

pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    pub config: Value,
}

fn physical(t0_ps: f64) -> Value {
    json!({"t0_ps": t0_ps, "dispersion_ps_nm_km": 20.0, "loss_db_km": 0.3, "wavelength_um": 1.5})
}

fn merge(mut base: Value, extra: Value) -> Value {
    let (Value::Object(b), Value::Object(e)) = (&mut base, extra) else {
        unreachable!()
    };
    b.extend(e);
    base
}

fn lossless() -> Value {
    json!({"gamma_t": 0.0})
}

pub fn all() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "fig01-intensity",
            description: "intensity evolution of an undamped soliton",
            config: merge(lossless(), json!({"t_end": 5.0, "output_step": 0.5, "observables": ["intensity"]})),
        },
        Scenario {
            name: "fig01-intensity-damped",
            description: "intensity evolution with 10 ps pulses (strong damping)",
            config: merge(physical(10.0), json!({"t_end": 5.0, "output_step": 0.5, "observables": ["intensity"]})),
        },
        Scenario {
            name: "fig02-ellipses",
            description: "uncertainty ellipses across the pulse at s = 0.85",
            config: merge(lossless(), json!({"s": 0.85, "output_times": [0.0, 1.0, 2.5, 5.0], "observables": ["ellipse"]})),
        },
        Scenario {
            name: "fig03-ellipse-trajectory",
            description: "ellipse evolution at fixed positions, s = 0.85",
            config: merge(lossless(), json!({"s": 0.85, "t_end": 5.0, "output_step": 0.1, "observables": ["ellipse"]})),
        },
        Scenario {
            name: "fig04-center-squeezing",
            description: "minimum quadrature noise b in the pulse centre, s = 0",
            config: merge(json!({"gamma_t": 0.05}), json!({"t_end": 5.0, "output_step": 0.1, "observables": ["ellipse"]})),
        },
        Scenario {
            name: "fig05-squeezing-map",
            description: "spatiotemporal b with 10 ps pulses",
            config: merge(physical(10.0), json!({"t_end": 5.0, "output_step": 0.25, "observables": ["ellipse"]})),
        },
        Scenario {
            name: "fig06-squeezed-thermal",
            description: "thermal photon number n and squeeze parameter r, undamped",
            config: merge(lossless(), json!({"t_end": 5.0, "output_step": 0.25, "observables": ["squeezed_thermal"]})),
        },
        Scenario {
            name: "fig06-squeezed-thermal-damped",
            description: "n and r with 10 ps pulses",
            config: merge(physical(10.0), json!({"t_end": 5.0, "output_step": 0.25, "observables": ["squeezed_thermal"]})),
        },
        Scenario {
            name: "fig07-spectrum-center",
            description: "midcomponent S_min(0) of the squeezing spectrum, 2 ps pulses",
            config: merge(
                physical(2.0),
                json!({"t_end": 5.0, "output_step": 0.25, "observables": ["spectrum"], "spectrum_omega_max": 0.0}),
            ),
        },
        Scenario {
            name: "fig08-spectrum",
            description: "full squeezing spectrum of an undamped soliton",
            config: merge(lossless(), json!({"output_times": [0.0, 1.0, 2.5, 5.0], "observables": ["spectrum"]})),
        },
        Scenario {
            name: "fig09-eta",
            description: "photon-number correlations of an undamped soliton",
            config: merge(
                lossless(),
                json!({"output_times": [2.5, 5.0], "observables": ["eta", "photons"], "eta_omega_max": 5.0}),
            ),
        },
        Scenario {
            name: "fig10-eta-damped",
            description: "photon-number correlations with 10 ps pulses",
            config: merge(
                physical(10.0),
                json!({"output_times": [2.5, 5.0], "observables": ["eta", "photons"], "eta_omega_max": 5.0}),
            ),
        },
        Scenario {
            name: "fig11-ordering-check",
            description: "same run at s = 0 and s = 0.85 with a consistency report",
            config: merge(
                lossless(),
                json!({
                    "s_pair": [0.0, 0.85],
                    "output_times": [1.0, 2.5, 5.0],
                    "observables": ["intensity", "ellipse", "spectrum", "eta"],
                    "eta_omega_max": 3.0
                }),
            ),
        },
    ]
}

pub fn find(name: &str) -> Option<Scenario> {
    all().into_iter().find(|s| s.name == name)
}
