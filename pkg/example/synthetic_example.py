"""Example fit on the one-dimensional synthetic benchmark.

The example draws 10,000 noisy samples of ``sin(3πx) + 0.3 cos(9πx) + sin(7πx) / 2``, holds out
10% of them, fits a Matérn-3/2 model with 100 splines and prints the test MSE and NLPD next to
the published reference numbers.

Example:
    >>> python example/synthetic_example.py
"""

from loguru import logger

from bandgp.constants import REFERENCE_SYNTHETIC_MSE_E1
from bandgp.constants import REFERENCE_SYNTHETIC_NLPD
from bandgp.constants import Family
from bandgp.datasets import make_synthetic
from bandgp.datasets import train_test_split
from bandgp.model import metrics
from bandgp.model import predict
from bandgp.modelfile import save_model
from bandgp.optimize import FitConfig
from bandgp.optimize import Trainer
from bandgp.utils import setup_logger


def main(n: int = 10_000, num_basis: int = 100, seed: int = 0) -> None:
    """Fit, score and save a model on the synthetic benchmark.

    Args:
        n: Number of samples before the split.
        num_basis: Splines in the basis.
        seed: Seed of the data and the split.
    """
    setup_logger(log_level="INFO")
    x, y = make_synthetic(n, seed=seed)
    x_train, y_train, x_test, y_test = train_test_split(x, y, test_fraction=0.1, seed=seed)

    trainer = Trainer(FitConfig(num_basis=num_basis, family=Family.MATERN32, seed=seed))
    fit = trainer.run(x_train, y_train)
    mean, variance = predict(fit, x_test)
    mse, nlpd = metrics(y_test, mean, variance, fit.hyper)

    logger.info(f"iterations={trainer.report.iterations} elbo={trainer.report.final_elbo:.3f}")
    logger.info(f"test MSE x1e-1 = {10 * mse:.3f} (reference {REFERENCE_SYNTHETIC_MSE_E1})")
    logger.info(f"test NLPD = {nlpd:.3f} (reference {REFERENCE_SYNTHETIC_NLPD})")
    save_model(fit, "synthetic_model.json", seed=seed)


if __name__ == "__main__":
    main()
