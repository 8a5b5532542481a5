import click

from config import Config
from models import VerificationError
from services.verification_service import VerificationService

verify_cli = click.Group('verify')


@verify_cli.command('gradcheck')
@click.option('--seeds', 'n_seeds', type=click.IntRange(min=1), default=Config.GRADCHECK_SEEDS, show_default=True)
@click.option('--seed', type=int, default=Config.SEED, show_default=True, help='First seed')
@click.option('--h', type=click.FloatRange(1e-7, 1e-4), default=Config.GRADCHECK_H, show_default=True,
              help='Finite-difference step')
@click.option('--tol', type=float, default=Config.GRADCHECK_TOL, show_default=True, help='Relative tolerance')
@click.option('--d-model', type=click.IntRange(min=2), default=8, show_default=True)
@click.option('--blocks', 'n_blocks', type=click.IntRange(min=0), default=2, show_default=True)
@click.option('--heads', 'n_heads', type=click.IntRange(min=1), default=2, show_default=True)
@click.option('--skip-model', is_flag=True, help='Only check the ops and the losses')
def gradcheck(n_seeds, seed, h, tol, d_model, n_blocks, n_heads, skip_model):
    """Finite-difference checks over every op, the losses and the full model"""
    if d_model % n_heads:
        raise click.BadParameter(f"--d-model {d_model} is not divisible by --heads {n_heads}")
    seeds = list(range(seed, seed + n_seeds))
    suite = VerificationService.run(seeds=seeds, h=h, tol=tol, d_model=d_model, n_blocks=n_blocks,
                                    n_heads=n_heads, include_model=not skip_model)
    click.echo(suite.to_frame().to_string(index=False))
    passed = len(suite.reports) - len(suite.failed)
    click.echo(f"{passed}/{len(suite.reports)} checks passed")
    if not suite.passed:
        raise VerificationError(
            f"{len(suite.failed)} gradient check(s) failed: {', '.join(r.name for r in suite.failed)}")
