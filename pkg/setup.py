import setuptools

short_description = "Distributed linear-quadratic estimation and control synthesis over directed graphs."

try:
    with open("README.md", "r") as handle:
        long_description = handle.read()
except FileNotFoundError:
    long_description = short_description

if __name__ == "__main__":
    setuptools.setup(
        name='lqgraph',
        description=short_description,
        author='The lqgraph Development Team',
        license='BSD-3C',
        include_package_data=True,
        version="0.1.0",
        packages=setuptools.find_packages(),
        package_data={"lqgraph": ["data/systems/*.json"]},
        install_requires=[
            # Base requires
            'numpy>=1.17',
            'scipy>=1.4',
            'pandas',
            'pydantic>=2.0',
            'pydantic-settings>=2.0',
            'pyyaml>=5.1',
            'tornado',
            'tqdm',

            # Testing
            'pytest',
        ],
        entry_points={
            "console_scripts": [
                "lqgraph=lqgraph.cli.lqgraph_cli:main",
            ]
        },
        extras_require={
            'docs': [
                'sphinx',
                'sphinx_rtd_theme',
                'numpydoc',
            ],
            'tests': [
                'pytest',
                'pytest-cov',
            ],
        },
        tests_require=[
            'pytest',
            'pytest-cov',
        ],
        classifiers=[
            'Development Status :: 4 - Beta',
            'Intended Audience :: Science/Research',
            'Programming Language :: Python :: 3',
        ],
        zip_safe=False,
        long_description=long_description,
        long_description_content_type="text/markdown"
    )
