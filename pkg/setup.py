"""Install the pcflow package."""

import ast
from pathlib import Path

from setuptools import find_packages, setup


def get_version(file_name: str, version_variable: str = "__version__") -> str:
    """Find the version by walking the AST to avoid duplication.

    Parameters
    ----------
    file_name : str
        The file we are parsing to get the version string from.
    version_variable : str
        The variable name that holds the version string.

    Raises
    ------
    ValueError
        If there was no assignment to version_variable in file_name.

    Returns
    -------
    version_string : str
        The version string parsed from file_name_name.
    """
    with open(file_name) as f:
        tree = ast.parse(f.read())
        for node in ast.walk(tree):
            if isinstance(node, ast.Assign):
                if getattr(node.targets[0], "id", None) == version_variable:
                    return node.value.value
    raise ValueError(
        f"Could not find an assignment to {version_variable} " f"within '{file_name}'"
    )


with open(Path(__file__).parent / "README.md", encoding="utf-8") as f:
    LONG_DESCRIPTION = f.read()


setup(
    name="pcflow",
    version=get_version("pcflow/__init__.py"),
    description="Predictor-corrector samplers for the probability flow ODE of score-based diffusion models.",
    long_description=LONG_DESCRIPTION,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=("tests", "tests.*")),
    include_package_data=True,
    package_data={"pcflow": ["presets/*.json"]},
    python_requires=">=3.8",
    classifiers=[
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python",
        "Development Status :: 3 - Alpha",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "Programming Language :: Python :: 3 :: Only",
        "Natural Language :: English",
        "Operating System :: MacOS :: MacOS X",
        "Operating System :: Microsoft :: Windows",
        "Operating System :: POSIX :: Linux",
    ],
    keywords="diffusion score-based sampling langevin",
    license="MIT",
    install_requires=[
        "numpy",
        "file-or-name",
        "scipy",
        "numba",
        'importlib_resources; python_version < "3.9.0"',
        'importlib_metadata; python_version < "3.10.0"',
        "prompt_toolkit",
    ],
    extras_require={
        "test": ["pytest"],
        "docs": ["sphinx", "numpydoc"],
    },
    entry_points={
        "console_scripts": [
            "pcflow = pcflow.scripts.pcflow_cli:main",
        ],
        "pcflow.plugins.correctors": [
            "overdamped = pcflow.correctors.overdamped:OverdampedCorrector",
            "underdamped = pcflow.correctors.underdamped:UnderdampedCorrector",
        ],
        "pcflow.plugins.perturbations": [
            "none = pcflow.perturbations.additive:NoPerturbation",
            "constant_bias = pcflow.perturbations.additive:ConstantBias",
            "sinusoidal = pcflow.perturbations.additive:Sinusoidal",
            "sign_flip = pcflow.perturbations.fault:SignFlip",
        ],
    },
)
