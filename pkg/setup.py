from setuptools import setup, find_packages

setup(
    name="antipt_spdc",
    version="0.1.0",
    author="antipt_spdc developers",
    description="Quantum simulation of SPDC in dissipatively coupled anti-PT-symmetric waveguides",
    long_description=open("README.md", "r", encoding="utf-8").read(),
    long_description_content_type="text/markdown",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.9",
        "thewalrus>=0.21",
        "PyYAML>=6.0",
    ],
    extras_require={
        "test": ["pytest>=7.0"],
    },
    entry_points={
        "console_scripts": [
            "antipt_spdc=antipt_spdc.cli:main",
        ],
    },
    python_requires=">=3.9",
)
