use rand::Rng;

use super::mlp::{Gradients, Mlp, Optimizer, OptimizerKind, Workspace};
use super::replay::{ReplayBuffer, VecTransition};
use crate::error::{EbeError, Result};
use crate::scalar::Scalar;

/// Delayed copy of the online network used for bootstrapped targets.
#[derive(Debug, Clone)]
pub struct TargetNetwork<F> {
    net: Mlp<F>,
    sync_period: u64,
}

impl<F: Scalar> TargetNetwork<F> {
    pub fn new(online: &Mlp<F>, sync_period: u64) -> Result<Self> {
        if sync_period == 0 {
            return Err(EbeError::OutOfRange("target sync period must be positive".into()));
        }
        Ok(Self { net: online.clone(), sync_period })
    }

    pub fn net(&self) -> &Mlp<F> {
        &self.net
    }

    pub fn sync_period(&self) -> u64 {
        self.sync_period
    }

    /// `θ⁻ := θ`.
    pub fn sync(&mut self, online: &Mlp<F>) -> Result<()> {
        self.net.copy_from(online)
    }

    pub fn forward(&self, x: &[F]) -> Result<Vec<F>> {
        self.net.forward(x)
    }
}

fn check_batch<F: Scalar>(batch: &[&VecTransition<F>], gamma: F) -> Result<()> {
    if batch.is_empty() {
        return Err(EbeError::Empty("training batch"));
    }
    if !(gamma > F::zero() && gamma <= F::one()) {
        return Err(EbeError::OutOfRange(format!("gamma = {gamma} must be in (0, 1]")));
    }
    Ok(())
}

fn td_target<F: Scalar>(target: &Mlp<F>, tr: &VecTransition<F>, gamma: F, ws: &mut Workspace<F>) -> Result<F> {
    if tr.terminal {
        return Ok(tr.reward);
    }
    let next = target.forward_with(&tr.next_state, ws)?;
    Ok(tr.reward + gamma * next.iter().copied().fold(F::neg_infinity(), F::max))
}

fn check_action<F: Scalar>(net: &Mlp<F>, tr: &VecTransition<F>) -> Result<()> {
    if tr.action >= net.output_dim() {
        return Err(EbeError::OutOfRange(format!("action {} >= {}", tr.action, net.output_dim())));
    }
    Ok(())
}

/// `mean_i (Q(sᵢ,aᵢ;θ) − yᵢ)²` with `yᵢ = rᵢ + γ (1 − doneᵢ) max_b Q(s′ᵢ,b;θ⁻)`.
pub fn dqn_loss<F: Scalar>(net: &Mlp<F>, target: &Mlp<F>, batch: &[&VecTransition<F>], gamma: F) -> Result<F> {
    check_batch(batch, gamma)?;
    let mut ws = Workspace::default();
    let mut total = F::zero();
    for tr in batch {
        check_action(net, tr)?;
        let y = td_target(target, tr, gamma, &mut ws)?;
        let q = net.forward_with(&tr.state, &mut ws)?[tr.action];
        total += (q - y) * (q - y);
    }
    Ok(total / F::from_usize(batch.len()).expect("batch size fits scalar"))
}

/// Loss and its gradient with respect to the online parameters; targets are constants.
pub fn dqn_loss_and_gradient<F: Scalar>(
    net: &Mlp<F>,
    target: &Mlp<F>,
    batch: &[&VecTransition<F>],
    gamma: F,
    grads: &mut Gradients<F>,
    ws: &mut Workspace<F>,
) -> Result<F> {
    check_batch(batch, gamma)?;
    grads.clear();
    let n = F::from_usize(batch.len()).expect("batch size fits scalar");
    let mut d_out = vec![F::zero(); net.output_dim()];
    let mut total = F::zero();
    for tr in batch {
        check_action(net, tr)?;
        let y = td_target(target, tr, gamma, ws)?;
        let q = net.forward_with(&tr.state, ws)?[tr.action];
        let err = q - y;
        total += err * err;
        d_out.iter_mut().for_each(|d| *d = F::zero());
        d_out[tr.action] = F::lit(2.0) * err / n;
        net.backward(ws, &d_out, grads)?;
    }
    Ok(total / n)
}

/// One optimizer step on `batch`; returns the loss before the step.
pub fn dqn_train_step<F: Scalar>(
    net: &mut Mlp<F>,
    target: &TargetNetwork<F>,
    batch: &[&VecTransition<F>],
    gamma: F,
    optimizer: &mut Optimizer<F>,
    grads: &mut Gradients<F>,
    ws: &mut Workspace<F>,
) -> Result<F> {
    let loss = dqn_loss_and_gradient(net, &target.net, batch, gamma, grads, ws)?;
    if !loss.is_finite() {
        return Err(EbeError::NonFinite(format!("dqn loss {loss}")));
    }
    optimizer.step(net, grads);
    if !net.all_finite() {
        return Err(EbeError::NonFinite("network parameters after update".into()));
    }
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnSettings {
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_sync: u64,
    pub train_start: usize,
    /// Environment steps between gradient updates.
    pub train_every: u64,
}

impl Default for DqnSettings {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64],
            optimizer: OptimizerKind::sgd_momentum(1e-3, 0.9),
            gamma: 0.99,
            replay_capacity: 10_000,
            batch_size: 32,
            target_sync: 500,
            train_start: 500,
            train_every: 1,
        }
    }
}

/// Online network, target network, replay and optimizer state bundled together.
#[derive(Debug, Clone)]
pub struct DqnAgent<F> {
    online: Mlp<F>,
    target: TargetNetwork<F>,
    optimizer: Optimizer<F>,
    replay: ReplayBuffer<VecTransition<F>>,
    settings: DqnSettings,
    grads: Gradients<F>,
    ws: Workspace<F>,
    steps: u64,
    last_loss: Option<F>,
}

impl<F: Scalar> DqnAgent<F> {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, actions: usize, settings: DqnSettings, rng: &mut R) -> Result<Self> {
        if settings.batch_size == 0 {
            return Err(EbeError::Empty("batch size"));
        }
        let sizes: Vec<usize> = std::iter::once(input_dim)
            .chain(settings.hidden.iter().copied())
            .chain(std::iter::once(actions))
            .collect();
        let online = Mlp::new(&sizes, rng)?;
        let target = TargetNetwork::new(&online, settings.target_sync)?;
        let optimizer = Optimizer::new(settings.optimizer, &online);
        let replay = ReplayBuffer::new(settings.replay_capacity)?;
        let grads = Gradients::zeros_like(&online);
        Ok(Self { online, target, optimizer, replay, settings, grads, ws: Workspace::default(), steps: 0, last_loss: None })
    }

    pub fn online(&self) -> &Mlp<F> {
        &self.online
    }

    pub fn target(&self) -> &TargetNetwork<F> {
        &self.target
    }

    pub fn settings(&self) -> &DqnSettings {
        &self.settings
    }

    pub fn replay(&self) -> &ReplayBuffer<VecTransition<F>> {
        &self.replay
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn last_loss(&self) -> Option<F> {
        self.last_loss
    }

    pub fn q_values(&mut self, observation: &[F]) -> Result<Vec<F>> {
        Ok(self.online.forward_with(observation, &mut self.ws)?.to_vec())
    }

    /// Stores a transition, trains every `train_every` steps once enough data is stored, and
    /// syncs the target on schedule. Returns the pre-step loss if trained.
    pub fn observe<R: Rng + ?Sized>(&mut self, transition: VecTransition<F>, rng: &mut R) -> Result<Option<F>> {
        self.replay.push(transition);
        self.steps += 1;
        let mut loss = None;
        let warm = self.replay.len() >= self.settings.train_start.max(self.settings.batch_size);
        if warm && self.steps.is_multiple_of(self.settings.train_every.max(1)) {
            let batch = self.replay.sample(self.settings.batch_size, rng)?;
            let l = dqn_train_step(
                &mut self.online,
                &self.target,
                &batch,
                F::lit(self.settings.gamma),
                &mut self.optimizer,
                &mut self.grads,
                &mut self.ws,
            )?;
            self.last_loss = Some(l);
            loss = Some(l);
        }
        if self.steps.is_multiple_of(self.target.sync_period) {
            self.target.sync(&self.online)?;
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::mlp::{Activation, Dense};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(state: Vec<f64>, action: usize, reward: f64, next: Vec<f64>, terminal: bool) -> VecTransition<f64> {
        VecTransition { state, action, reward, next_state: next, terminal }
    }

    fn scalar_net(w: f64) -> Mlp<f64> {
        Mlp::from_layers(vec![Dense::new(1, 1, vec![w], vec![0.0], Activation::Linear).unwrap()]).unwrap()
    }

    #[test]
    fn single_parameter_closed_form() {
        // Q(x) = w x; terminal target y = r; L = (w x − r)², dL/dw = 2 x (w x − r).
        let (w, x, r) = (0.7, 1.3, 0.25);
        let net = scalar_net(w);
        let t = tr(vec![x], 0, r, vec![0.0], true);
        let mut g = Gradients::zeros_like(&net);
        let loss = dqn_loss_and_gradient(&net, &net, &[&t], 0.9, &mut g, &mut Workspace::default()).unwrap();
        assert!((loss - (w * x - r).powi(2)).abs() < 1e-10);
        assert!((g.flatten()[0] - 2.0 * x * (w * x - r)).abs() < 1e-10);
        assert!((g.flatten()[1] - 2.0 * (w * x - r)).abs() < 1e-10);
    }

    #[test]
    fn bootstrap_uses_target_network() {
        // y = r + γ · w⁻ x′
        let online = scalar_net(1.0);
        let target = scalar_net(2.0);
        let t = tr(vec![1.0], 0, 0.5, vec![3.0], false);
        let loss = dqn_loss(&online, &target, &[&t], 0.5).unwrap();
        let y: f64 = 0.5 + 0.5 * 2.0 * 3.0;
        assert!((loss - (1.0 - y).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn zero_loss_leaves_parameters() {
        let mut net = scalar_net(0.5);
        let target = TargetNetwork::new(&net, 10).unwrap();
        let t = tr(vec![2.0], 0, 1.0, vec![0.0], true);
        let mut opt = Optimizer::new(OptimizerKind::sgd_momentum(1e-3, 0.9), &net);
        let mut g = Gradients::zeros_like(&net);
        let before = net.parameters();
        let loss = dqn_train_step(&mut net, &target, &[&t], 0.9, &mut opt, &mut g, &mut Workspace::default()).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net.parameters(), before);
    }

    #[test]
    fn empty_batch_and_bad_action_error() {
        let net = scalar_net(1.0);
        assert!(dqn_loss(&net, &net, &[], 0.9).is_err());
        let t = tr(vec![1.0], 3, 0.0, vec![1.0], true);
        assert!(dqn_loss(&net, &net, &[&t], 0.9).is_err());
        let ok = tr(vec![1.0], 0, 0.0, vec![1.0], true);
        assert!(dqn_loss(&net, &net, &[&ok], 1.5).is_err());
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut net = scalar_net(1.0);
        let target = TargetNetwork::new(&net, 10).unwrap();
        let t = tr(vec![1.0], 0, f64::INFINITY, vec![0.0], true);
        let mut opt = Optimizer::new(OptimizerKind::sgd_momentum(1e-3, 0.9), &net);
        let mut g = Gradients::zeros_like(&net);
        let err = dqn_train_step(&mut net, &target, &[&t], 0.9, &mut opt, &mut g, &mut Workspace::default());
        assert!(matches!(err, Err(EbeError::NonFinite(_))));
    }

    #[test]
    fn target_snapshot_semantics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut online = Mlp::<f64>::new(&[3, 8, 2], &mut rng).unwrap();
        let mut target = TargetNetwork::new(&online, 5).unwrap();
        let x = [0.2, -0.4, 0.9];
        assert_eq!(target.forward(&x).unwrap(), online.forward(&x).unwrap());
        let frozen = target.forward(&x).unwrap();
        let shifted: Vec<f64> = online.parameters().iter().map(|p| p + 0.1).collect();
        online.set_parameters(&shifted).unwrap();
        assert_eq!(target.forward(&x).unwrap(), frozen);
        target.sync(&online).unwrap();
        let once = target.net().parameters();
        target.sync(&online).unwrap();
        assert_eq!(target.net().parameters(), once);
        assert_eq!(once, online.parameters());
        let other = Mlp::<f64>::zeros(&[3, 4, 2]).unwrap();
        assert!(target.sync(&other).is_err());
    }

    #[test]
    fn agent_trains_after_warmup_and_syncs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let settings = DqnSettings { hidden: vec![4], batch_size: 2, train_start: 3, target_sync: 4, ..Default::default() };
        let mut agent = DqnAgent::<f64>::new(2, 2, settings, &mut rng).unwrap();
        let mut trained = Vec::new();
        for i in 0..4 {
            let t = tr(vec![i as f64, 1.0], i % 2, 1.0, vec![0.0, 1.0], false);
            trained.push(agent.observe(t, &mut rng).unwrap().is_some());
        }
        assert_eq!(trained, vec![false, false, true, true]);
        assert_eq!(agent.target().net().parameters(), agent.online().parameters());
    }

    #[test]
    fn agent_learns_constant_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let settings = DqnSettings {
            hidden: vec![8],
            optimizer: OptimizerKind::adam(1e-2),
            batch_size: 8,
            train_start: 8,
            target_sync: 20,
            ..Default::default()
        };
        let mut agent = DqnAgent::<f64>::new(2, 2, settings, &mut rng).unwrap();
        for _ in 0..2000 {
            let t = tr(vec![1.0, 0.0], 1, 1.0, vec![0.0, 1.0], true);
            agent.observe(t, &mut rng).unwrap();
        }
        let q = agent.q_values(&[1.0, 0.0]).unwrap();
        assert!((q[1] - 1.0).abs() < 1e-2, "{q:?}");
    }
}
