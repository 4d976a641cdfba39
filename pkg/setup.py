from setuptools import setup, find_packages

exec(open('dumlab/version.py').read())

setup(
    name='dumlab',
    description='Desk-scale laboratory for deterministic uncertainty methods with evidential and sparse GP heads.',
    version=__version__,
    packages=find_packages(exclude=['tests', 'tests.*']),
    author='Netherlands eScience Center',
    install_requires=[
        'numpy>=1.17',
        'scipy>=1.6',
        'tables>=3.6',
        'pandas>=1.0',
        'progressbar2',
        'PyYAML>=5.1',
        'jsonschema>=3.0',
    ],
    setup_requires=['pytest-runner'],
    tests_require=['pytest', 'pytest-cov'],
    include_package_data=True,
    zip_safe=False,
    entry_points={
        'console_scripts': [
            'dum-lab=dumlab.script:main',
        ],
    },
    python_requires='>=3.8',
    license='Apache',
    classifiers=[
        'License :: OSI Approved :: Apache Software License',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
        'Environment :: Console',
    ]
)
