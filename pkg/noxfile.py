from __future__ import annotations

import nox

nox.options.reuse_existing_virtualenvs = True

nox.options.sessions = [
    "test",
]


# tests


@nox.session
def test(session: nox.Session):
    session.install("-e", ".[test]")

    session.run("pyright", "--warnings")

    session.run("pytest", *session.posargs)


@nox.session
def experiments(session: nox.Session):
    """Desk-scale training runs (collapse, end-to-end kNN gain, RankMe sweep)."""
    session.install("-e", ".[test]")

    session.run("pytest", "-m", "experiment", *session.posargs)


# development helpers


@nox.session
def sslforge(session: nox.Session):
    session.install(".")
    session.run("sslforge", *session.posargs)


@nox.session
def smoke(session: nox.Session):
    """Run a tiny pretrain + eval cycle from the bundled example config."""
    session.install(".")

    output_dir = session.create_tmp()
    session.run(
        "sslforge",
        "pretrain",
        "sslforge.toml",
        "--epochs",
        "1",
        "--output-dir",
        output_dir,
    )
    session.run(
        "sslforge",
        "eval",
        "sslforge.toml",
        f"{output_dir}/checkpoint",
        "--output-dir",
        output_dir,
    )
