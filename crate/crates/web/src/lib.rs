//! Browser bindings. Three operations are exposed: torus kernel fields, a
//! steppable particle system on a 2-d torus, and limit-diffusion samples.
//!
//! Each binding is a thin wrapper over a plain Rust function so the logic
//! can be tested natively; wasm-bindgen error values only exist in a JS
//! host.

use catalytic::particle::{step_until, ParticleState, SimConfig, Species, StepOutcome};
use catalytic::sde::limit_diffusion_samples;
use catalytic::seeding::{rng_from_seed, SimRng};
use catalytic::{KernelTable, Lattice, OffspringLaw, Result};
use wasm_bindgen::prelude::*;

/// Largest half-width accepted by the demo, keeping fields at most 41².
pub const MAX_HALF_WIDTH: u32 = 20;

fn demo_torus(half_width: u32) -> Result<Lattice> {
    if half_width > MAX_HALF_WIDTH {
        return Err(catalytic::Error::Config(vec![format!(
            "half_width: at most {MAX_HALF_WIDTH} in the demo, got {half_width}"
        )]));
    }
    Lattice::torus(2, half_width)
}

/// `p_t` followed by `g_t` on the 2-d torus, each in site-index order.
pub fn kernel_fields(half_width: u32, kappa: f64, t: f64) -> Result<Vec<f64>> {
    let table = KernelTable::new(demo_torus(half_width)?, kappa)?;
    let mut out = table.p_t_field(t)?;
    out.extend(table.green_field(t)?);
    Ok(out)
}

/// `(x, y)` endpoints of limit-diffusion paths, interleaved.
pub fn limit_endpoints(x0: f64, y0: f64, gamma_tilde: f64, t: f64, paths: usize, seed: u64) -> Result<Vec<f64>> {
    let samples = limit_diffusion_samples(x0, y0, gamma_tilde, t, paths, 1e-3, seed)?;
    Ok(samples.iter().flat_map(|p| [p.x, p.y]).collect())
}

fn js(err: catalytic::Error) -> JsError {
    JsError::new(&err.to_string())
}

#[wasm_bindgen(js_name = kernelFields)]
pub fn kernel_fields_js(half_width: u32, kappa: f64, t: f64) -> std::result::Result<Vec<f64>, JsError> {
    kernel_fields(half_width, kappa, t).map_err(js)
}

#[wasm_bindgen(js_name = limitEndpoints)]
pub fn limit_endpoints_js(
    x0: f64,
    y0: f64,
    gamma_tilde: f64,
    t: f64,
    paths: usize,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    limit_endpoints(x0, y0, gamma_tilde, t, paths, seed.into()).map_err(js)
}

/// Particle system on a 2-d torus, advanced in slices of model time.
#[wasm_bindgen]
pub struct ParticleDemo {
    config: SimConfig,
    state: ParticleState,
    rng: SimRng,
    events: u64,
}

impl ParticleDemo {
    pub fn create(half_width: u32, gamma: f64, theta1: u32, theta2: u32, seed: u64) -> Result<Self> {
        let lattice = demo_torus(half_width)?;
        // Slices carry their own targets; the config horizon is never reached.
        let config = SimConfig::new(lattice, 1.0, gamma, OffspringLaw::binary_critical(), f64::MAX, seed);
        config.validate()?;
        Ok(ParticleDemo {
            state: ParticleState::constant(lattice, theta1.into(), theta2.into())?,
            rng: rng_from_seed(seed),
            config,
            events: 0,
        })
    }

    pub fn state(&self) -> &ParticleState {
        &self.state
    }
}

#[wasm_bindgen]
impl ParticleDemo {
    /// Seeds are `u32` on the JS side to avoid BigInt.
    #[wasm_bindgen(constructor)]
    pub fn new(
        half_width: u32,
        gamma: f64,
        theta1: u32,
        theta2: u32,
        seed: u32,
    ) -> std::result::Result<ParticleDemo, JsError> {
        Self::create(half_width, gamma, theta1, theta2, seed.into()).map_err(js)
    }

    /// Run until `time() + dt` or until `max_events` more events, whichever
    /// comes first. Returns the number of events performed.
    pub fn advance(&mut self, dt: f64, max_events: u32) -> u32 {
        let target = self.state.clock() + dt.max(0.0);
        let mut done = 0;
        while done < max_events {
            match step_until(&mut self.state, &self.config, target, &mut self.rng) {
                StepOutcome::Event(_) => done += 1,
                StepOutcome::Quiescent | StepOutcome::HorizonReached => break,
            }
        }
        self.events += u64::from(done);
        done
    }

    pub fn time(&self) -> f64 {
        self.state.clock()
    }

    pub fn events(&self) -> f64 {
        self.events as f64
    }

    pub fn side(&self) -> u32 {
        self.config.lattice.side().expect("torus") as u32
    }

    #[wasm_bindgen(js_name = xiField)]
    pub fn xi_field(&self) -> Vec<u32> {
        self.field(Species::Xi)
    }

    #[wasm_bindgen(js_name = etaField)]
    pub fn eta_field(&self) -> Vec<u32> {
        self.field(Species::Eta)
    }

    /// `[Ξ, H]`.
    pub fn totals(&self) -> Vec<f64> {
        vec![self.state.total_xi() as f64, self.state.total_eta() as f64]
    }
}

impl ParticleDemo {
    fn field(&self, species: Species) -> Vec<u32> {
        self.state
            .field(species)
            .expect("torus")
            .into_iter()
            .map(|c| c.min(u64::from(u32::MAX)) as u32)
            .collect()
    }
}
