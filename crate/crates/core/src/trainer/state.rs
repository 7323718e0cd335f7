use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::gen::{
    add_noise_batch, build_vcu, denoising_loss, encode_condition, generator_rollout, rollout_tensors,
    standard_normal, Denoiser, GaussianMixture, VcuInput, FRAME_DIM,
};
use crate::nn::{adam_step, clip_global_norm, AdamConfig, AdamState, Graph, Tensor, Var};
use crate::objectives::{
    dmd_loss, gan_loss_critic_traced, gan_loss_generator_traced, kl_gradient, otd_gradient, otd_loss,
    DenoiserScore, Discriminator, ScoreBatch, ScoreSource,
};
use crate::trainer::config::TrainConfig;
use crate::trainer::metrics::{Branch, MetricsRow};

/// Integration steps for the teacher flow targets of the initialisation stage.
pub const FLOW_STEPS: usize = 32;

/// Everything a training step mutates. Cloned before each step so a failed
/// step can be undone.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub generator: Denoiser<f64>,
    pub generator_opt: AdamState<f64>,
    pub fake: Denoiser<f64>,
    pub fake_opt: AdamState<f64>,
    pub critic: Discriminator<f64>,
    pub critic_opt: AdamState<f64>,
    /// Steps completed, initialisation stage included.
    pub step: usize,
    pub generator_updates: usize,
    pub fake_updates: usize,
    pub critic_updates: usize,
    pub rng: ChaCha8Rng,
}

/// Structured log line. Carries no timestamps so logs are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub step: usize,
    pub kind: String,
    pub detail: serde_json::Value,
}

/// Few-step generator distillation against a frozen mixture teacher.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    target: GaussianMixture<f64>,
    condition: Tensor<f64>,
    state: TrainState,
    events: Vec<Event>,
    grad_norms: Vec<f64>,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let target = cfg.target.build::<f64>(cfg.frames)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let d = cfg.data_dim();
        let c = crate::gen::condition_width(cfg.prompt_dim, cfg.frames, FRAME_DIM);
        let generator = Denoiser::new(d, if cfg.acc_init { 0 } else { c }, &cfg.generator_hidden, &mut rng)?;
        let fake = Denoiser::new(d, 0, &cfg.fake_hidden, &mut rng)?;
        let critic = Discriminator::new(
            cfg.disc_taps.clone(),
            cfg.fake_hidden[cfg.disc_taps[0]],
            cfg.disc_proj,
            &mut rng,
        )?;
        critic.check_compatible(fake.mlp().widths())?;
        let prompt: Vec<f64> = (0..cfg.prompt_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let vcu = build_vcu(prompt, FRAME_DIM, VcuInput::T2v { n: cfg.frames })?;
        let condition = Tensor::matrix(1, c, encode_condition(&vcu))?;
        let state = TrainState {
            generator_opt: AdamState::new(
                generator.mlp(),
                AdamConfig::with_lr(if cfg.acc_init { cfg.init_lr } else { cfg.lr_generator }),
            ),
            fake_opt: AdamState::new(fake.mlp(), AdamConfig::with_lr(cfg.lr_critic)),
            critic_opt: AdamState::new(&critic, AdamConfig::with_lr(cfg.lr_critic)),
            generator,
            fake,
            critic,
            step: 0,
            generator_updates: 0,
            fake_updates: 0,
            critic_updates: 0,
            rng,
        };
        Ok(Self {
            cfg,
            target,
            condition,
            state,
            events: Vec::new(),
            grad_norms: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn target(&self) -> &GaussianMixture<f64> {
        &self.target
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut TrainState {
        &mut self.state
    }

    /// The `1 × C` condition the conditional generator sees.
    pub fn condition(&self) -> &Tensor<f64> {
        &self.condition
    }

    /// Condition to feed the generator in its current form.
    pub fn generator_condition(&self) -> Option<&Tensor<f64>> {
        (self.state.generator.cond_dim() > 0).then_some(&self.condition)
    }

    pub fn step(&self) -> usize {
        self.state.step
    }

    pub fn finished(&self) -> bool {
        self.state.step >= self.cfg.total_steps()
    }

    pub fn grad_norms(&self) -> &[f64] {
        &self.grad_norms
    }

    pub fn drain_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }

    pub fn log_event(&mut self, kind: &str, detail: serde_json::Value) {
        self.events.push(Event {
            step: self.state.step,
            kind: kind.to_string(),
            detail,
        });
    }

    fn init_steps(&self) -> usize {
        if self.cfg.acc_init {
            self.cfg.acc_init_steps
        } else {
            0
        }
    }

    /// Objective the next step will run.
    pub fn next_branch(&self) -> Branch {
        let step = self.state.step;
        if step < self.init_steps() {
            return Branch::Init;
        }
        let k = step - self.init_steps();
        match (self.cfg.matching_enabled(), self.cfg.enable_gan) {
            (true, true) if k % 2 == 1 => Branch::Gan,
            (false, true) => Branch::Gan,
            _ => Branch::Matching,
        }
    }

    /// Runs one step. On error the state is restored to what it was before
    /// the step and an `abort` event is recorded.
    pub fn train_step(&mut self) -> Result<MetricsRow> {
        if self.finished() {
            return Err(Error::InvalidArgument(format!(
                "training already finished after {} steps",
                self.state.step
            )));
        }
        let snapshot = self.state.clone();
        let norms = self.grad_norms.len();
        match self.step_inner() {
            Ok(row) => Ok(row),
            Err(e) => {
                self.state = snapshot;
                self.grad_norms.truncate(norms);
                self.log_event("abort", json!({ "error": e.to_string() }));
                Err(e)
            }
        }
    }

    fn step_inner(&mut self) -> Result<MetricsRow> {
        if self.state.step == self.init_steps() && self.cfg.acc_init && self.state.generator.cond_dim() == 0 {
            self.finish_init();
        }
        let branch = self.next_branch();
        let mut row = MetricsRow::new(self.state.step, branch);
        match branch {
            Branch::Init => {
                self.generator_distill(&mut row)?;
                self.critic_denoise(&mut row)?;
            }
            Branch::Matching => {
                self.generator_matching(&mut row)?;
                self.critic_denoise(&mut row)?;
            }
            Branch::Gan => {
                self.generator_gan(&mut row)?;
                self.critic_gan(&mut row)?;
            }
        }
        self.state.step += 1;
        Ok(row)
    }

    /// Swaps the unconditional generator for a conditional copy whose new
    /// inputs start at zero weight. The fake score network and the critic
    /// carry over unchanged.
    fn finish_init(&mut self) {
        let c = self.condition.cols();
        self.state.generator = self.state.generator.widen_condition(c);
        self.state.generator_opt =
            AdamState::new(self.state.generator.mlp(), AdamConfig::with_lr(self.cfg.lr_generator));
        self.log_event("acc_init_complete", json!({ "condition_width": c }));
    }

    fn sample_times(&mut self, n: usize) -> Vec<f64> {
        let steps = self.cfg.schedule.steps();
        (0..n).map(|_| steps[self.state.rng.random_range(0..steps.len())]).collect()
    }

    /// Traced rollout with the generator's parameters as leaves.
    fn traced_rollout(&mut self, graph: &mut Graph<f64>) -> Result<(crate::nn::MlpVars, Var)> {
        let (b, d) = (self.cfg.batch_size, self.cfg.data_dim());
        let vars = self.state.generator.mlp().bind(graph, true);
        let z = standard_normal(b, d, &mut self.state.rng);
        let z = graph.constant(z);
        let cond = self.generator_condition().cloned();
        let roll = generator_rollout(
            graph,
            &self.state.generator,
            &vars,
            z,
            cond.as_ref(),
            &self.cfg.schedule,
            &mut self.state.rng,
        )?;
        Ok((vars, roll.x0))
    }

    /// Untraced samples from the current generator.
    fn frozen_samples(&mut self, n: usize) -> Result<Tensor<f64>> {
        let z = standard_normal(n, self.cfg.data_dim(), &mut self.state.rng);
        let cond = self.generator_condition().cloned();
        let steps = rollout_tensors(&self.state.generator, &z, cond.as_ref(), &self.cfg.schedule, &mut self.state.rng)?;
        Ok(steps.into_iter().last().expect("schedules are non-empty").2)
    }

    fn update_generator(&mut self, graph: &Graph<f64>, vars: &crate::nn::MlpVars, loss: Var) -> Result<f64> {
        let grads = graph.backward(loss)?;
        let mut g = vars.grads(graph, &grads);
        let norm = clip_global_norm(&mut g, self.cfg.grad_clip);
        if !norm.is_finite() {
            return Err(Error::NonFinite("generator gradient".into()));
        }
        adam_step(self.state.generator.mlp_mut(), &g, &mut self.state.generator_opt)?;
        self.state.generator_updates += 1;
        self.grad_norms.push(norm);
        Ok(norm)
    }

    /// Initialisation stage: regress the unconditional generator at each
    /// scheduled time onto the teacher's deterministic flow end points from
    /// noised target samples. The loss is logged in the `loss_dmd` column.
    fn generator_distill(&mut self, row: &mut MetricsRow) -> Result<()> {
        let (b, d) = (self.cfg.batch_size, self.cfg.data_dim());
        let x0 = self.target.sample(b, &mut self.state.rng)?;
        let t = self.sample_times(b);
        let noise = standard_normal(b, d, &mut self.state.rng);
        let x_t = add_noise_batch(&x0, &t, &noise)?;
        let y = self.target.flow_endpoints(&x_t, &t, FLOW_STEPS)?;
        let mut graph = Graph::new();
        let vars = self.state.generator.mlp().bind(&mut graph, true);
        let xv = graph.constant(x_t);
        let cond = self.generator_condition().cloned();
        let pred = self.state.generator.forward(&mut graph, &vars, xv, &t, cond.as_ref())?.output;
        let loss = denoising_loss(&mut graph, pred, &y)?;
        row.loss_dmd = Some(graph.value(loss).item()?);
        row.grad_norm = Some(self.update_generator(&graph, &vars, loss)?);
        Ok(())
    }

    /// Transport and/or reverse-KL update of the generator.
    fn generator_matching(&mut self, row: &mut MetricsRow) -> Result<()> {
        let b = self.cfg.batch_size;
        let mut graph = Graph::new();
        let (vars, x0) = self.traced_rollout(&mut graph)?;
        let x0_value = graph.value(x0).clone();
        let t = self.sample_times(b);
        let noise = standard_normal(b, self.cfg.data_dim(), &mut self.state.rng);
        let x_t = add_noise_batch(&x0_value, &t, &noise)?;
        let fake = DenoiserScore { net: &self.state.fake };

        let mut terms = Vec::new();
        let mut use_dmd = self.cfg.enable_dmd;
        if self.cfg.enable_otd {
            let ot = otd_gradient(&x_t, &t, &fake, &self.target, &self.cfg.sinkhorn())?;
            row.sinkhorn_iters = Some(ot.iterations);
            if ot.converged {
                let l = otd_loss(&mut graph, x0, &ot.grad)?;
                row.loss_otd = Some(graph.value(l).item()?);
                terms.push(l);
            } else {
                use_dmd = true;
                let detail = json!({ "iterations": ot.iterations, "value": ot.value });
                self.log_event("stale_transport_gradient", detail);
            }
        }
        if use_dmd {
            let fake = DenoiserScore { net: &self.state.fake };
            let g = kl_gradient(
                &ScoreBatch::evaluate(&self.target, &x_t, &t, ScoreSource::Real)?,
                &ScoreBatch::evaluate(&fake, &x_t, &t, ScoreSource::Fake)?,
            )?;
            let l = dmd_loss(&mut graph, x0, &g)?;
            row.loss_dmd = Some(graph.value(l).item()?);
            // λ weighs the reverse-KL term only next to a transport term.
            if terms.is_empty() {
                terms.push(l);
            } else if self.cfg.lambda_dmd > 0.0 {
                terms.push(graph.scale(l, self.cfg.lambda_dmd)?);
            }
        }
        let mut loss = terms[0];
        for &l in &terms[1..] {
            loss = graph.add(loss, l)?;
        }
        row.grad_norm = Some(self.update_generator(&graph, &vars, loss)?);
        Ok(())
    }

    /// `ttur_ratio` denoising updates of the fake score network on fresh
    /// generator samples.
    fn critic_denoise(&mut self, row: &mut MetricsRow) -> Result<()> {
        let b = self.cfg.batch_size;
        let mut total = 0.0;
        for _ in 0..self.cfg.ttur_ratio {
            let x0 = self.frozen_samples(b)?;
            let t = self.sample_times(b);
            let noise = standard_normal(b, self.cfg.data_dim(), &mut self.state.rng);
            let x_t = add_noise_batch(&x0, &t, &noise)?;
            let mut graph = Graph::new();
            let vars = self.state.fake.mlp().bind(&mut graph, true);
            let xv = graph.constant(x_t);
            let pred = self.state.fake.forward(&mut graph, &vars, xv, &t, None)?.output;
            let loss = denoising_loss(&mut graph, pred, &x0)?;
            total += graph.value(loss).item()?;
            let grads = graph.backward(loss)?;
            let mut g = vars.grads(&graph, &grads);
            clip_global_norm(&mut g, self.cfg.grad_clip);
            adam_step(self.state.fake.mlp_mut(), &g, &mut self.state.fake_opt)?;
            self.state.fake_updates += 1;
        }
        row.loss_denoise = Some(total / self.cfg.ttur_ratio as f64);
        Ok(())
    }

    /// Critic logits for noisy samples held in `x_t`, reading the fake score
    /// network's hidden activations. Both networks enter as constants.
    fn logits(
        &self,
        graph: &mut Graph<f64>,
        critic_vars: &crate::objectives::DiscriminatorVars,
        x_t: Var,
        t: &[f64],
    ) -> Result<Var> {
        let fake_vars = self.state.fake.mlp().bind(graph, false);
        let trace = self.state.fake.forward(graph, &fake_vars, x_t, t, None)?;
        self.state.critic.forward(graph, critic_vars, &trace.hidden, t)
    }

    fn generator_gan(&mut self, row: &mut MetricsRow) -> Result<()> {
        let (b, d) = (self.cfg.batch_size, self.cfg.data_dim());
        let mut graph = Graph::new();
        let (vars, x0) = self.traced_rollout(&mut graph)?;
        let t = self.sample_times(b);
        let noise = standard_normal::<f64, _>(b, d, &mut self.state.rng);
        let keep = graph.constant(Tensor::matrix(b, 1, t.iter().map(|ti| 1.0 - ti).collect())?);
        let kept = graph.mul_broadcast(x0, keep)?;
        let mut scaled = noise;
        for i in 0..b {
            for v in scaled.row_mut(i) {
                *v *= t[i];
            }
        }
        let scaled = graph.constant(scaled);
        let x_fake = graph.add(kept, scaled)?;

        let real = self.target.sample(b, &mut self.state.rng)?;
        let t_real = self.sample_times(b);
        let noise = standard_normal(b, d, &mut self.state.rng);
        let x_real = graph.constant(add_noise_batch(&real, &t_real, &noise)?);

        let critic_vars = self.state.critic.bind(&mut graph, false);
        let fake_logits = self.logits(&mut graph, &critic_vars, x_fake, &t)?;
        let real_logits = self.logits(&mut graph, &critic_vars, x_real, &t_real)?;
        let loss = gan_loss_generator_traced(&mut graph, fake_logits, real_logits)?;
        row.loss_gan_g = Some(graph.value(loss).item()?);
        row.grad_norm = Some(self.update_generator(&graph, &vars, loss)?);
        Ok(())
    }

    /// `ttur_ratio` critic updates. Only the critic's own parameters move.
    fn critic_gan(&mut self, row: &mut MetricsRow) -> Result<()> {
        let (b, d) = (self.cfg.batch_size, self.cfg.data_dim());
        let mut total = 0.0;
        for _ in 0..self.cfg.ttur_ratio {
            let fake = self.frozen_samples(b)?;
            let t_fake = self.sample_times(b);
            let noise = standard_normal(b, d, &mut self.state.rng);
            let x_fake = add_noise_batch(&fake, &t_fake, &noise)?;
            let real = self.target.sample(b, &mut self.state.rng)?;
            let t_real = self.sample_times(b);
            let noise = standard_normal(b, d, &mut self.state.rng);
            let x_real = add_noise_batch(&real, &t_real, &noise)?;

            let mut graph = Graph::new();
            let critic_vars = self.state.critic.bind(&mut graph, true);
            let xf = graph.constant(x_fake);
            let xr = graph.constant(x_real);
            let fake_logits = self.logits(&mut graph, &critic_vars, xf, &t_fake)?;
            let real_logits = self.logits(&mut graph, &critic_vars, xr, &t_real)?;
            let loss = gan_loss_critic_traced(&mut graph, real_logits, fake_logits)?;
            total += graph.value(loss).item()?;
            let grads = graph.backward(loss)?;
            let mut g = critic_vars.grads(&graph, &grads);
            clip_global_norm(&mut g, self.cfg.grad_clip);
            adam_step(&mut self.state.critic, &g, &mut self.state.critic_opt)?;
            self.state.critic_updates += 1;
        }
        row.loss_gan_c = Some(total / self.cfg.ttur_ratio as f64);
        Ok(())
    }

    /// Samples from the current generator with its own schedule.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Tensor<f64>> {
        self.generate_with(&self.cfg.schedule, n, rng)
    }

    /// Samples using an arbitrary schedule, e.g. a single step.
    pub fn generate_with<R: Rng + ?Sized>(
        &self,
        schedule: &crate::gen::NoiseSchedule,
        n: usize,
        rng: &mut R,
    ) -> Result<Tensor<f64>> {
        let z = standard_normal(n, self.cfg.data_dim(), rng);
        let steps = rollout_tensors(&self.state.generator, &z, self.generator_condition(), schedule, rng)?;
        Ok(steps.into_iter().last().expect("schedules are non-empty").2)
    }
}
