//! Interacting-bubble surrogate: a single cavity against the Rayleigh time,
//! then one 32-bubble cloud on resolutions 0 to 4.

use ofmlmc::models::{BubbleSystem, Model, SurrogateModel, SurrogateParams};
use ofmlmc::rng::SampleStream;

fn main() -> ofmlmc::Result<()> {
    let params = SurrogateParams {
        ramp_time: 0.0,
        ..Default::default()
    };
    let single = BubbleSystem::new(params.clone(), vec![[0.0; 3]], vec![1e-3], [0.0; 3])?;
    let tr = single.integrate(2)?;
    let rayleigh = 0.915 * 1e-3 * (params.density / (params.ambient_pressure - params.gas_pressure)).sqrt();
    println!(
        "single bubble: collapse {:.3} us, Rayleigh time {:.3} us, peak {:.1} MPa",
        tr.collapse_time * 1e6,
        rayleigh * 1e6,
        tr.peak_pressure / 1e6
    );

    let model = SurrogateModel::new(SurrogateParams::default())?;
    let stream = SampleStream::for_sample(11, 0, 0);
    let mut previous: Option<f64> = None;
    for res in 0..=4 {
        let s = model.evaluate(&stream, res)?;
        let peak = s.get("peak_pressure").expect("peak pressure");
        let diff = previous
            .map(|p| format!("{:.3}", (peak - p).abs()))
            .unwrap_or_else(|| "-".into());
        println!(
            "resolution {res}: peak {peak:9.3} MPa  |diff| {diff:>8}  collapse {:.3} us  sensor {:.3} MPa",
            s.get("collapse_time").unwrap(),
            s.get("sensor_pressure").unwrap()
        );
        previous = Some(peak);
    }
    Ok(())
}
